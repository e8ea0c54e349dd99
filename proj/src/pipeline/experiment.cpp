#include "lcgan/pipeline/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <toml.hpp>

#include "lcgan/core/archive.hpp"
#include "lcgan/data/synthetic.hpp"
#include "lcgan/models/serialization.hpp"
#include "lcgan/training/classifier.hpp"
#include "lcgan/training/gan.hpp"

namespace lcgan::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;
using training::TrainConfig;

// ------------------------------------------------------------------ config

namespace {

template <typename F>
auto keyed(const std::string& key, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const ConfigError& e) {
    // Drop the inner "field '...': " prefix; the outer error names the full path.
    const std::string what = e.what();
    const auto cut = what.find("': ");
    throw ConfigError(key + "." + e.field(), cut == std::string::npos ? what : what.substr(cut + 3));
  } catch (const std::exception& e) {
    throw ConfigError(key, e.what());
  }
}

void reject_unknown(const json& j, const std::string& where, std::initializer_list<const char*> known) {
  if (!j.is_object()) throw ConfigError(where.empty() ? "config" : where, "expected a table");
  for (const auto& [k, v] : j.items()) {
    if (std::none_of(known.begin(), known.end(), [&](const char* n) { return k == n; }))
      throw ConfigError(where.empty() ? k : where + "." + k, "unknown field");
  }
}

fs::path resolve(const fs::path& p, const fs::path& base) {
  return p.is_absolute() || base.empty() ? p : base / p;
}

json to_json(const SyntheticData& s) {
  return {{"class_count", s.class_count},
          {"image_shape", {s.image.h, s.image.w, s.image.c}},
          {"train_per_class", s.train_per_class},
          {"val_per_class", s.val_per_class},
          {"test_per_class", s.test_per_class},
          {"seed", s.seed}};
}

SyntheticData synthetic_from_json(const json& j) {
  reject_unknown(j, "data.synthetic",
                 {"class_count", "image_shape", "train_per_class", "val_per_class", "test_per_class", "seed"});
  SyntheticData s;
  for (const auto& [k, v] : j.items()) {
    keyed("data.synthetic." + k, [&, &k = k, &v = v] {
      if (k == "class_count") s.class_count = v.get<int>();
      else if (k == "image_shape") {
        const auto d = v.get<std::vector<int>>();
        if (d.size() != 3) throw std::runtime_error("expected [height, width, channels]");
        s.image = {d[0], d[1], d[2]};
      } else if (k == "train_per_class") s.train_per_class = v.get<int>();
      else if (k == "val_per_class") s.val_per_class = v.get<int>();
      else if (k == "test_per_class") s.test_per_class = v.get<int>();
      else if (k == "seed") s.seed = v.get<std::uint64_t>();
      return 0;
    });
  }
  return s;
}

json toml_to_json(const toml::node& n) {
  if (const auto* t = n.as_table()) {
    json o = json::object();
    for (const auto& [k, v] : *t) o[std::string(k.str())] = toml_to_json(v);
    return o;
  }
  if (const auto* a = n.as_array()) {
    json o = json::array();
    for (const auto& v : *a) o.push_back(toml_to_json(v));
    return o;
  }
  if (const auto* v = n.as_integer()) return v->get();
  if (const auto* v = n.as_floating_point()) return v->get();
  if (const auto* v = n.as_boolean()) return v->get();
  if (const auto* v = n.as_string()) return v->get();
  std::ostringstream where;
  where << n.source().begin;
  throw ConfigError("config", "unsupported TOML value (dates and times are not used) at " + where.str());
}

}  // namespace

void ExperimentConfig::validate() const {
  if (out_dir.empty()) throw ConfigError("out", "output directory is empty");
  if (seeds.empty()) throw ConfigError("seeds", "at least one seed is required");
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size())
    throw ConfigError("seeds", "duplicate seed");
  if (methods.empty()) throw ConfigError("methods", "at least one method is required");
  if (std::set<losses::Mode>(methods.begin(), methods.end()).size() != methods.size())
    throw ConfigError("methods", "duplicate method");
  if (synthetic.has_value() == !manifests.empty())
    throw ConfigError("data", "give either data.synthetic or data.manifests");
  if (synthetic) {
    if (synthetic->class_count < 2 || synthetic->class_count > 10)
      throw ConfigError("data.synthetic.class_count", "must be in [2, 10]");
    if (synthetic->train_per_class < 1 || synthetic->val_per_class < 1 || synthetic->test_per_class < 1)
      throw ConfigError("data.synthetic", "every split needs at least one item per class");
  } else {
    for (const auto& k : corpus_keys())
      if (!manifests.count(k)) throw ConfigError("data.manifests." + k, "missing");
    for (const auto& [k, p] : manifests) {
      if (std::find(corpus_keys().begin(), corpus_keys().end(), k) == corpus_keys().end())
        throw ConfigError("data.manifests." + k, "unknown corpus key");
      if (!fs::exists(p)) throw ConfigError("data.manifests." + k, "file not found: " + p.string());
    }
  }
  if (grid_items_per_class < 1) throw ConfigError("grid_items_per_class", "must be at least 1");
  if (imbalance.reduction_rate < 0 || imbalance.reduction_rate >= 1)
    throw ConfigError("imbalance.reduction_rate", "must lie in [0, 1)");
  if (synthetic) keyed("imbalance", [&] { imbalance.validate(synthetic->class_count); return 0; });
  keyed("pretrain_r", [&] { pretrain_r.validate(); return 0; });
  keyed("pretrain_s", [&] { pretrain_s.validate(); return 0; });
  keyed("gan", [&] { gan.validate(); return 0; });
  keyed("retrain", [&] { retrain.validate(); return 0; });
}

ExperimentConfig experiment_config_from_json(const json& j, const fs::path& base_dir) {
  reject_unknown(j, "", {"out", "seeds", "methods", "strict", "grid_items_per_class", "data", "imbalance",
                         "pretrain_r", "pretrain_s", "gan", "retrain"});
  ExperimentConfig c;
  for (const auto& [k, v] : j.items()) {
    if (k == "data") {
      reject_unknown(v, "data", {"synthetic", "manifests"});
      if (v.contains("synthetic")) c.synthetic = synthetic_from_json(v["synthetic"]);
      if (v.contains("manifests")) {
        reject_unknown(v["manifests"], "data.manifests",
                       {"real_train", "real_val", "real_test", "simulated_train", "simulated_val",
                        "simulated_test"});
        for (const auto& [mk, mv] : v["manifests"].items())
          c.manifests[mk] = keyed("data.manifests." + mk, [&, &mv = mv] { return resolve(mv.get<std::string>(), base_dir); });
      }
      continue;
    }
    if (k == "imbalance") {
      reject_unknown(v, "imbalance", {"minor_classes", "reduction_rate"});
      if (v.contains("minor_classes"))
        c.imbalance.minor_classes = keyed("imbalance.minor_classes", [&] { return v["minor_classes"].get<std::set<int>>(); });
      if (v.contains("reduction_rate"))
        c.imbalance.reduction_rate = keyed("imbalance.reduction_rate", [&] { return v["reduction_rate"].get<double>(); });
      continue;
    }
    if (k == "pretrain_r" || k == "pretrain_s" || k == "retrain") {
      TrainConfig& t = k == "pretrain_r" ? c.pretrain_r : k == "pretrain_s" ? c.pretrain_s : c.retrain;
      t = keyed(k, [&, &v = v] { return training::train_config_from_json(v, TrainConfig::classifier_defaults()); });
      continue;
    }
    if (k == "gan") {
      c.gan = keyed(k, [&, &v = v] { return training::train_config_from_json(v, TrainConfig::gan_defaults()); });
      continue;
    }
    keyed(k, [&, &k = k, &v = v] {
      if (k == "out") c.out_dir = v.get<std::string>();
      else if (k == "seeds") c.seeds = v.get<std::vector<std::uint64_t>>();
      else if (k == "strict") c.strict = v.get<bool>();
      else if (k == "grid_items_per_class") c.grid_items_per_class = v.get<int>();
      else if (k == "methods") {
        c.methods.clear();
        for (const auto& m : v) c.methods.push_back(losses::mode_from_string(m.get<std::string>()));
      }
      return 0;
    });
  }
  c.validate();
  return c;
}

json to_json(const ExperimentConfig& c) {
  json methods = json::array();
  for (auto m : c.methods) methods.push_back(losses::to_string(m));
  json data = json::object();
  if (c.synthetic) data["synthetic"] = to_json(*c.synthetic);
  for (const auto& [k, p] : c.manifests) data["manifests"][k] = p.string();
  return {{"out", fs::absolute(c.out_dir).lexically_normal().string()},
          {"seeds", c.seeds},
          {"methods", methods},
          {"strict", c.strict},
          {"grid_items_per_class", c.grid_items_per_class},
          {"data", data},
          {"imbalance", {{"minor_classes", c.imbalance.minor_classes}, {"reduction_rate", c.imbalance.reduction_rate}}},
          {"pretrain_r", training::to_json(c.pretrain_r)},
          {"pretrain_s", training::to_json(c.pretrain_s)},
          {"gan", training::to_json(c.gan)},
          {"retrain", training::to_json(c.retrain)}};
}

ExperimentConfig experiment_config_from_toml(const std::string& text, const fs::path& base_dir) {
  toml::table t;
  try {
    t = toml::parse(text);
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << e.description() << " at " << e.source().begin;
    throw ConfigError("config", msg.str());
  }
  return experiment_config_from_json(toml_to_json(t), base_dir);
}

ExperimentConfig load_experiment_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  if (path.extension() == ".json") {
    json j;
    try {
      j = json::parse(ss.str());
    } catch (const json::parse_error& e) {
      throw ConfigError("config", e.what());
    }
    return experiment_config_from_json(j, path.parent_path());
  }
  return experiment_config_from_toml(ss.str(), path.parent_path());
}

const std::vector<std::string>& corpus_keys() {
  static const std::vector<std::string> keys{"real_train",      "real_val",      "real_test",
                                             "simulated_train", "simulated_val", "simulated_test"};
  return keys;
}

const data::Corpus& DataSet::at(const std::string& key) const {
  const auto it = corpora.find(key);
  if (it == corpora.end()) throw InvalidArgument("no corpus '" + key + "'");
  return it->second;
}

const MethodResult& SeedResult::method(const std::string& name) const {
  for (const auto& m : methods)
    if (m.method == name) return m;
  throw InvalidArgument("seed " + std::to_string(seed) + " has no result for method '" + name + "'");
}

std::string method_name(losses::Mode m) { return losses::to_string(m); }

// -------------------------------------------------------------- experiment

namespace {

constexpr const char* kBaseline = "baseline";

template <typename F>
auto phase(const std::string& name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const PhaseError&) {
    throw;
  } catch (const std::exception& e) {
    throw PhaseError(name, e.what());
  }
}

json preservation_json(const eval::Preservation& p) {
  return {{"overall", p.overall}, {"per_class", p.per_class}, {"class_totals", p.class_totals}};
}

eval::Preservation preservation_from_json(const json& j) {
  return {j.at("overall").get<double>(), j.at("per_class").get<std::vector<double>>(),
          j.at("class_totals").get<std::vector<std::size_t>>()};
}

json read_json(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw IoError("cannot read " + p.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw FormatError(p.string() + ": " + e.what());
  }
}

void write_json(const fs::path& p, const json& j) {
  fs::create_directories(p.parent_path());
  const fs::path tmp = p.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << j.dump(2) << '\n';
  }
  fs::rename(tmp, p);
}

std::ofstream open_log(const fs::path& p, bool append) {
  fs::create_directories(p.parent_path());
  std::ofstream out(p, append ? std::ios::app : std::ios::trunc);
  if (!out) throw IoError("cannot open log " + p.string());
  return out;
}

std::string fixed(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

Experiment::Experiment(ExperimentConfig cfg, std::ostream* log, bool force)
    : cfg_(std::move(cfg)), log_(log), force_(force) {
  cfg_.validate();
}

void Experiment::note(const std::string& line) const {
  if (log_) *log_ << line << std::endl;
}

SeedPaths Experiment::paths(std::uint64_t seed) const {
  const fs::path root = cfg_.out_dir / ("seed_" + std::to_string(seed));
  return {root, root / "checkpoints", root / "logs", root / "reports", root / "grids"};
}

TrainConfig Experiment::phase_config(const TrainConfig& base, std::uint64_t seed) const {
  TrainConfig c = base;
  c.seed = seed;
  return c;
}

TrainConfig Experiment::gan_config(std::uint64_t seed, losses::Mode mode) const {
  TrainConfig c = phase_config(cfg_.gan, seed);
  c.mode = mode;
  c.minor_classes = cfg_.imbalance.minor_classes;
  return c;
}

// ---------------------------------------------------------------- data

namespace {

std::map<std::string, data::DatasetManifest> resolved_manifests(const ExperimentConfig& cfg) {
  std::map<std::string, data::DatasetManifest> out;
  if (cfg.synthetic) {
    const auto& s = *cfg.synthetic;
    for (auto domain : {data::Domain::real, data::Domain::simulated}) {
      for (auto split : {data::Split::train, data::Split::val, data::Split::test}) {
        data::DatasetManifest m;
        const std::string key = data::to_string(domain) + "_" + data::to_string(split);
        m.name = "digits_" + key;
        m.domain = domain;
        m.class_count = s.class_count;
        m.image_shape = s.image;
        m.split = split;
        const int n = split == data::Split::train ? s.train_per_class
                      : split == data::Split::val ? s.val_per_class
                                                  : s.test_per_class;
        m.item_count_per_class.assign(static_cast<std::size_t>(s.class_count), n);
        m.source = data::Source::synthetic;
        m.seed = s.seed;
        m.validate();
        out[key] = m;
      }
    }
    return out;
  }
  for (const auto& [key, path] : cfg.manifests) {
    data::DatasetManifest m = keyed("data.manifests." + key, [&, &path = path] { return data::load_manifest(path); });
    const fs::path base = path.parent_path();
    for (std::string* p : {&m.images_path, &m.labels_path, &m.root})
      if (!p->empty()) *p = fs::absolute(resolve(*p, base)).lexically_normal().string();
    const std::string expect = key.substr(0, key.find('_'));
    if (data::to_string(m.domain) != expect)
      throw ConfigError("data.manifests." + key + ".domain", "expected domain " + expect);
    out[key] = m;
  }
  const auto& first = out.begin()->second;
  for (const auto& [key, m] : out) {
    if (m.class_count != first.class_count)
      throw ConfigError("data.manifests." + key + ".class_count", "differs between corpora");
    if (!(m.image_shape == first.image_shape))
      throw ConfigError("data.manifests." + key + ".image_shape", "differs between corpora");
  }
  return out;
}

}  // namespace

bool Experiment::build_data() {
  return phase("data", [&] {
    const fs::path dir = cfg_.out_dir / "data";
    const auto manifests = resolved_manifests(cfg_);
    bool wrote = false;
    for (const auto& [key, m] : manifests) {
      const fs::path corpus_path = dir / (key + ".corpus");
      const fs::path manifest_path = dir / (key + ".manifest.json");
      if (!force_ && fs::exists(corpus_path) && fs::exists(manifest_path)) {
        bool same = false;
        try {
          same = data::to_json(data::load_manifest(manifest_path)) == data::to_json(m);
        } catch (const Error&) {
        }
        if (same) continue;
      }
      const data::Corpus c = data::build_corpus(m);
      data::save_corpus(corpus_path, c, {{"manifest", data::to_json(m)}});
      data::save_manifest(manifest_path, m);
      note("data: wrote " + corpus_path.string() + " (" + std::to_string(c.size()) + " items)");
      wrote = true;
    }
    if (wrote) data_.reset();
    else note("data: up to date");
    return wrote;
  });
}

const DataSet& Experiment::data() {
  if (data_) return *data_;
  return phase("data", [&]() -> const DataSet& {
    DataSet d;
    const fs::path dir = cfg_.out_dir / "data";
    for (const auto& key : corpus_keys()) {
      const fs::path p = dir / (key + ".corpus");
      if (!fs::exists(p)) throw IoError("missing " + p.string() + "; run `data build` first");
      d.corpora[key] = data::load_corpus(p);
    }
    const auto& first = d.at("real_train");
    for (const auto& [key, c] : d.corpora)
      if (c.class_count() != first.class_count() || !(c.shape() == first.shape()))
        throw FormatError("corpus " + key + " disagrees with real_train in class count or image shape");
    keyed("imbalance", [&] { cfg_.imbalance.validate(first.class_count()); return 0; });
    data_ = std::move(d);
    return *data_;
  });
}

data::Corpus Experiment::real_train_imbalanced(std::uint64_t seed) {
  return data::induce_imbalance(data().at("real_train"), cfg_.imbalance, seed);
}

// ------------------------------------------------------------- pretrain

void Experiment::pretrain(std::uint64_t seed) {
  phase("pretrain", [&] {
    const SeedPaths p = paths(seed);
    const fs::path report = p.reports / "pretrain.json";
    const TrainConfig cr = phase_config(cfg_.pretrain_r, seed);
    const TrainConfig cs = phase_config(cfg_.pretrain_s, seed);
    const json hashes = {{"f_r", training::config_hash(cr)}, {"f_s", training::config_hash(cs)},
                         {"judge", training::config_hash(cr)}};
    if (!force_ && fs::exists(report) && fs::exists(p.checkpoints / "f_r.bin") &&
        fs::exists(p.checkpoints / "f_s.bin") && fs::exists(p.checkpoints / "judge.bin")) {
      const json r = read_json(report);
      if (r.value("config_hash", json()) == hashes) {
        note("seed " + std::to_string(seed) + " pretrain: up to date");
        return 0;
      }
    }
    const DataSet& d = data();
    const data::Corpus real = real_train_imbalanced(seed);
    json out = {{"seed", seed}, {"config_hash", hashes}};

    auto one = [&](const std::string& name, const data::Corpus& train, const data::Corpus& heldout,
                   const TrainConfig& c, models::DomainSide side) {
      auto log = open_log(p.logs / ("pretrain_" + name + ".jsonl"), false);
      auto r = training::pretrain_classifier(train, heldout, c, side, &log);
      const auto test = eval::evaluate_classifier(r.run.net, d.at(side == models::DomainSide::real_side
                                                                      ? "real_test" : "simulated_test"));
      models::save_classifier(p.checkpoints / (name + ".bin"), r.run.net,
                              {{"config_hash", training::config_hash(c)}, {"seed", seed}});
      out[name] = {{"heldout_accuracy", r.heldout_accuracy},
                   {"train_items", train.size()},
                   {"test_per_class_accuracy", test.per_class_accuracy}};
      note("seed " + std::to_string(seed) + " pretrain " + name + ": held-out accuracy " +
           fixed(r.heldout_accuracy));
    };
    one("f_r", real, d.at("real_val"), cr, models::DomainSide::real_side);
    one("f_s", d.at("simulated_train"), d.at("simulated_val"), cs, models::DomainSide::sim_side);
    one("judge", d.at("real_train"), d.at("real_val"), cr, models::DomainSide::real_side);
    write_json(report, out);
    return 0;
  });
}

// ---------------------------------------------------------------- train

void Experiment::train(std::uint64_t seed, losses::Mode mode) {
  const std::string name = method_name(mode);
  phase("train:" + name, [&] {
    const SeedPaths p = paths(seed);
    const fs::path dir = p.checkpoints / name;
    const fs::path final_g = dir / "g_s2r.bin";
    const TrainConfig c = gan_config(seed, mode);
    const std::string hash = training::config_hash(c);
    if (!force_ && fs::exists(final_g) &&
        TensorArchive::load(final_g).metadata.value("config_hash", std::string()) == hash) {
      note("seed " + std::to_string(seed) + " train " + name + ": up to date");
      return 0;
    }
    if (force_ && fs::exists(dir)) fs::remove_all(dir);
    const DataSet& d = data();
    const data::Corpus real = real_train_imbalanced(seed);

    std::optional<models::Classifier<float>> f_r, f_s;
    if (mode == losses::Mode::label_cyclegan) {
      for (const char* f : {"f_r.bin", "f_s.bin"})
        if (!fs::exists(p.checkpoints / f))
          throw IoError("missing " + (p.checkpoints / f).string() + "; run pretrain first");
      f_r.emplace(models::load_classifier(p.checkpoints / "f_r.bin"));
      f_s.emplace(models::load_classifier(p.checkpoints / "f_s.bin"));
    }
    training::GanTrainer trainer(c, real, d.at("simulated_train"), f_r ? &*f_r : nullptr, f_s ? &*f_s : nullptr);
    const fs::path latest = dir / "latest.ckpt";
    bool resumed = false;
    if (fs::exists(latest)) {
      try {
        trainer.load_checkpoint(latest);
        resumed = true;
        note("seed " + std::to_string(seed) + " train " + name + ": resuming at step " +
             std::to_string(trainer.steps_done()));
      } catch (const ConfigError&) {
        note("seed " + std::to_string(seed) + " train " + name + ": checkpoint config differs, starting over");
      }
    }
    auto log = open_log(p.logs / (name + "_gan.jsonl"), resumed);
    training::TrainHooks hooks;
    hooks.log = &log;
    hooks.checkpoint_dir = dir;
    hooks.on_epoch = [&](int e) {
      note("seed " + std::to_string(seed) + " train " + name + ": epoch " + std::to_string(e) + "/" +
           std::to_string(c.epochs));
    };
    trainer.train(hooks);
    const json meta = {{"config_hash", hash}, {"seed", seed}, {"steps", trainer.steps_done()}};
    models::save_generator(final_g, trainer.s2r(), meta);
    if (auto* r2s = trainer.r2s()) models::save_generator(dir / "g_r2s.bin", *r2s, meta);
    return 0;
  });
}

// ------------------------------------------------------------ transform

void Experiment::transform(std::uint64_t seed, losses::Mode mode) {
  const std::string name = method_name(mode);
  phase("transform:" + name, [&] {
    const SeedPaths p = paths(seed);
    const fs::path g_path = p.checkpoints / name / "g_s2r.bin";
    const fs::path out = p.checkpoints / name / "transformed.corpus";
    if (!fs::exists(g_path)) throw IoError("missing " + g_path.string() + "; run train first");
    const std::string hash = TensorArchive::load(g_path).metadata.value("config_hash", std::string());
    if (!force_ && fs::exists(out)) {
      const json meta = TensorArchive::load(out).metadata;
      if (meta.contains("extra") && meta["extra"].value("generator_config_hash", std::string()) == hash) {
        note("seed " + std::to_string(seed) + " transform " + name + ": up to date");
        return 0;
      }
    }
    const auto g = models::load_generator(g_path);
    const data::Corpus t = training::transform_corpus(g, data().at("simulated_train"));
    data::save_corpus(out, t, {{"generator_config_hash", hash}, {"seed", seed}, {"method", name}});
    note("seed " + std::to_string(seed) + " transform " + name + ": " + std::to_string(t.size()) + " items");
    return 0;
  });
}

// -------------------------------------------------------------- retrain

MethodResult Experiment::retrain(std::uint64_t seed, const std::string& method) {
  return phase("retrain:" + method, [&] {
    const SeedPaths p = paths(seed);
    const fs::path dir = p.checkpoints / method;
    const fs::path clf = dir / "classifier.bin";
    const fs::path report = p.reports / (method + ".json");
    const TrainConfig c = phase_config(cfg_.retrain, seed);
    const bool baseline = method == kBaseline;
    std::string source_hash;
    if (!baseline) {
      const fs::path t = dir / "transformed.corpus";
      if (!fs::exists(t)) throw IoError("missing " + t.string() + "; run transform first");
      source_hash = TensorArchive::load(t).metadata["extra"].value("generator_config_hash", std::string());
    }
    if (!force_ && fs::exists(clf) && fs::exists(report)) {
      const json meta = TensorArchive::load(clf).metadata;
      if (meta.value("config_hash", std::string()) == training::config_hash(c) &&
          meta.value("generator_config_hash", std::string()) == source_hash) {
        note("seed " + std::to_string(seed) + " retrain " + method + ": up to date");
        MethodResult r;
        const json j = read_json(report);
        r.method = method;
        r.report = eval::eval_report_from_json(j);
        if (r.report.metadata.contains("label_preservation")) {
          r.judge = preservation_from_json(r.report.metadata["label_preservation"]["judge"]);
          r.f_r = preservation_from_json(r.report.metadata["label_preservation"]["f_r"]);
        }
        return r;
      }
    }
    const DataSet& d = data();
    const data::Corpus real = real_train_imbalanced(seed);
    auto log = open_log(p.logs / (method + "_retrain.jsonl"), false);
    json meta = {{"config_hash", training::config_hash(c)}, {"seed", seed}, {"method", method},
                 {"generator_config_hash", source_hash}};
    if (baseline) {
      auto run = training::train_classifier(real, c, models::DomainSide::real_side, &log);
      meta["steps"] = run.steps;
      meta["items_from_real"] = real.size() * static_cast<std::size_t>(c.epochs);
      meta["items_from_transformed"] = 0;
      fs::create_directories(dir);
      models::save_classifier(clf, run.net, meta);
    } else {
      const data::Corpus t = data::load_corpus(dir / "transformed.corpus");
      auto r = training::retrain_classifier(real, t, d.at("real_test"), c, cfg_.strict, &log);
      meta["steps"] = r.run.steps;
      meta["items_from_real"] = r.items_from_real;
      meta["items_from_transformed"] = r.items_from_transformed;
      meta["fell_back_to_real_only"] = r.fell_back_to_real_only;
      models::save_classifier(clf, r.run.net, meta);
    }
    return evaluate_saved(seed, method);
  });
}

MethodResult Experiment::evaluate(std::uint64_t seed, const std::string& method) {
  return phase("eval:" + method, [&] { return evaluate_saved(seed, method); });
}

MethodResult Experiment::evaluate_saved(std::uint64_t seed, const std::string& method) {
  const SeedPaths p = paths(seed);
  const fs::path clf = p.checkpoints / method / "classifier.bin";
  if (!fs::exists(clf)) throw IoError("missing " + clf.string() + "; run retrain first");
  const DataSet& d = data();
  const json meta = TensorArchive::load(clf).metadata;
  const auto net = models::load_classifier(clf);

  MethodResult r;
  r.method = method;
  r.report = eval::evaluate_classifier(net, d.at("real_test"));
  for (const char* k : {"seed", "config_hash", "steps", "items_from_real", "items_from_transformed"})
    if (meta.contains(k)) r.report.metadata[k] = meta[k];
  r.report.metadata["method"] = method;
  r.report.metadata["minor_classes"] = cfg_.imbalance.minor_classes;
  r.report.metadata["reduction_rate"] = cfg_.imbalance.reduction_rate;
  if (method != kBaseline) {
    const fs::path g_path = p.checkpoints / method / "g_s2r.bin";
    if (!fs::exists(g_path)) throw IoError("missing " + g_path.string());
    for (const char* f : {"judge.bin", "f_r.bin"})
      if (!fs::exists(p.checkpoints / f)) throw IoError("missing " + (p.checkpoints / f).string());
    const auto g = models::load_generator(g_path);
    const auto judge = models::load_classifier(p.checkpoints / "judge.bin");
    const auto f_r = models::load_classifier(p.checkpoints / "f_r.bin");
    r.judge = eval::label_preservation(judge, g, d.at("simulated_test"));
    r.f_r = eval::label_preservation(f_r, g, d.at("simulated_test"));
    r.report.label_preservation_rate = r.judge->overall;
    r.report.metadata["label_preservation"] = {{"judge", preservation_json(*r.judge)},
                                               {"f_r", preservation_json(*r.f_r)}};
  }
  write_json(p.reports / (method + ".json"), eval::to_json(r.report));
  note("seed " + std::to_string(seed) + " " + method + ": test accuracy " + fixed(r.report.overall_accuracy) +
       (r.judge ? ", label preservation " + fixed(r.judge->overall) : std::string()));
  return r;
}

// ------------------------------------------------------------- whole run

SeedResult Experiment::run_seed(std::uint64_t seed) {
  SeedResult out;
  out.seed = seed;
  pretrain(seed);
  for (auto m : cfg_.methods) {
    train(seed, m);
    transform(seed, m);
  }
  out.methods.push_back(retrain(seed, kBaseline));
  for (auto m : cfg_.methods) out.methods.push_back(retrain(seed, method_name(m)));
  phase("report", [&] { write_grid(seed); return 0; });
  const json pre = read_json(paths(seed).reports / "pretrain.json");
  out.f_r_heldout = pre["f_r"]["heldout_accuracy"].get<double>();
  out.f_s_heldout = pre["f_s"]["heldout_accuracy"].get<double>();
  out.judge_heldout = pre["judge"]["heldout_accuracy"].get<double>();
  return out;
}

std::vector<SeedResult> Experiment::run() {
  fs::create_directories(cfg_.out_dir);
  write_json(cfg_.out_dir / "experiment.json", to_json(cfg_));
  build_data();
  std::vector<SeedResult> results;
  for (auto s : cfg_.seeds) results.push_back(run_seed(s));
  phase("report", [&] { write_summary(results); return 0; });
  return results;
}

void Experiment::report() {
  phase("report", [&] {
    std::vector<SeedResult> results;
    for (auto s : cfg_.seeds) {
      results.push_back(load_seed_result(cfg_, s));
      write_grid(s);
    }
    write_summary(results);
    return 0;
  });
}

SeedResult load_seed_result(const ExperimentConfig& cfg, std::uint64_t seed) {
  const fs::path root = cfg.out_dir / ("seed_" + std::to_string(seed));
  SeedResult out;
  out.seed = seed;
  std::vector<std::string> names{kBaseline};
  for (auto m : cfg.methods) names.push_back(method_name(m));
  for (const auto& n : names) {
    const fs::path p = root / "reports" / (n + ".json");
    if (!fs::exists(p)) throw IoError("missing " + p.string() + "; the run for seed " + std::to_string(seed) +
                                      " is incomplete (run the pipeline first)");
    MethodResult r;
    r.method = n;
    r.report = eval::eval_report_from_json(read_json(p));
    if (r.report.metadata.contains("label_preservation")) {
      r.judge = preservation_from_json(r.report.metadata["label_preservation"]["judge"]);
      r.f_r = preservation_from_json(r.report.metadata["label_preservation"]["f_r"]);
    }
    out.methods.push_back(std::move(r));
  }
  const fs::path pre = root / "reports" / "pretrain.json";
  if (fs::exists(pre)) {
    const json j = read_json(pre);
    out.f_r_heldout = j["f_r"]["heldout_accuracy"].get<double>();
    out.f_s_heldout = j["f_s"]["heldout_accuracy"].get<double>();
    out.judge_heldout = j["judge"]["heldout_accuracy"].get<double>();
  }
  return out;
}

// Rows are simulated test items (grid_items_per_class per class); columns
// are x_s followed by G_s2r(x_s) for each method.
void Experiment::write_grid(std::uint64_t seed) {
  const SeedPaths p = paths(seed);
  const data::Corpus& sim = data().at("simulated_test");
  std::vector<std::size_t> picks;
  for (int k = 0; k < sim.class_count(); ++k) {
    int taken = 0;
    for (std::size_t i = 0; i < sim.size() && taken < cfg_.grid_items_per_class; ++i)
      if (sim.label(i) == k) {
        picks.push_back(i);
        ++taken;
      }
  }
  const data::Corpus sample = sim.subset(picks);
  std::vector<std::vector<std::vector<float>>> rows(sample.size());
  for (std::size_t i = 0; i < sample.size(); ++i) rows[i].emplace_back(sample.image(i).begin(), sample.image(i).end());
  std::string columns = "x_s";
  for (auto m : cfg_.methods) {
    const fs::path g_path = p.checkpoints / method_name(m) / "g_s2r.bin";
    if (!fs::exists(g_path)) throw IoError("missing checkpoint " + g_path.string());
    const auto g = models::load_generator(g_path);
    const data::Corpus t = training::transform_corpus(g, sample);
    for (std::size_t i = 0; i < t.size(); ++i) rows[i].emplace_back(t.image(i).begin(), t.image(i).end());
    columns += ", G_s2r(x_s) " + method_name(m);
  }
  eval::render_image_grid(rows, sample.shape(),
                          {"seed " + std::to_string(seed), "columns: " + columns,
                           "rows: " + std::to_string(cfg_.grid_items_per_class) + " simulated test items per class"},
                          p.grids / "transformed.png");
}

void Experiment::write_summary(const std::vector<SeedResult>& results) {
  std::vector<eval::SummaryRow> rows;
  for (const auto& s : results)
    for (const auto& m : s.methods)
      for (std::size_t k = 0; k < m.report.per_class_accuracy.size(); ++k)
        rows.push_back({m.method, cfg_.imbalance.reduction_rate, static_cast<int>(k), m.report.per_class_accuracy[k],
                        s.seed});
  eval::write_summary_csv(cfg_.out_dir / "summary.csv", rows);

  auto mean_sd = [](const std::vector<double>& v) {
    double mu = 0;
    for (double x : v) mu += x;
    mu /= static_cast<double>(v.size());
    double var = 0;
    for (double x : v) var += (x - mu) * (x - mu);
    const double sd = v.size() > 1 ? std::sqrt(var / static_cast<double>(v.size() - 1)) : 0.0;
    return fixed(mu) + " ± " + fixed(sd);
  };

  const std::size_t k = results.front().methods.front().report.per_class_accuracy.size();
  std::ostringstream md;
  md << "# Results\n\n";
  md << "Seeds:";
  for (const auto& s : results) md << ' ' << s.seed;
  md << ". Minor classes:";
  for (int c : cfg_.imbalance.minor_classes) md << ' ' << c;
  md << ", reduced by " << fixed(cfg_.imbalance.reduction_rate * 100, 1) << "%.\n\n";
  md << "## Real test accuracy (mean ± sd over seeds)\n\n| method |";
  for (std::size_t c = 0; c < k; ++c) md << " class " << c << (cfg_.imbalance.minor_classes.count(static_cast<int>(c)) ? " (minor)" : "") << " |";
  md << " overall |\n|---|";
  for (std::size_t c = 0; c <= k; ++c) md << "---|";
  md << '\n';
  for (std::size_t mi = 0; mi < results.front().methods.size(); ++mi) {
    md << "| " << results.front().methods[mi].method << " |";
    for (std::size_t c = 0; c < k; ++c) {
      std::vector<double> v;
      for (const auto& s : results) v.push_back(s.methods[mi].report.per_class_accuracy[c]);
      md << ' ' << mean_sd(v) << " |";
    }
    std::vector<double> v;
    for (const auto& s : results) v.push_back(s.methods[mi].report.overall_accuracy);
    md << ' ' << mean_sd(v) << " |\n";
  }
  md << "\n## Label preservation of G_s2r on simulated test items\n\n"
        "Judged by a classifier trained on the balanced real split (and by f_r).\n\n| method |";
  for (std::size_t c = 0; c < k; ++c) md << " class " << c << " |";
  md << " overall | overall (f_r) |\n|---|";
  for (std::size_t c = 0; c <= k + 1; ++c) md << "---|";
  md << '\n';
  for (std::size_t mi = 0; mi < results.front().methods.size(); ++mi) {
    if (!results.front().methods[mi].judge) continue;
    md << "| " << results.front().methods[mi].method << " |";
    for (std::size_t c = 0; c < k; ++c) {
      std::vector<double> v;
      for (const auto& s : results) v.push_back(s.methods[mi].judge->per_class[c]);
      md << ' ' << mean_sd(v) << " |";
    }
    std::vector<double> a, b;
    for (const auto& s : results) {
      a.push_back(s.methods[mi].judge->overall);
      b.push_back(s.methods[mi].f_r->overall);
    }
    md << ' ' << mean_sd(a) << " | " << mean_sd(b) << " |\n";
  }
  std::ofstream out(cfg_.out_dir / "report.md", std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + (cfg_.out_dir / "report.md").string());
  out << md.str();
}

}  // namespace lcgan::pipeline
