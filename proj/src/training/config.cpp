#include "lcgan/training/config.hpp"

#include <cmath>
#include <cstdio>

namespace lcgan::training {

using nlohmann::json;

TrainConfig TrainConfig::gan_defaults() { return TrainConfig{}; }

TrainConfig TrainConfig::classifier_defaults() {
  TrainConfig c;
  c.epochs = 10;
  c.batch_size = 32;
  c.learning_rate = 1e-3;
  c.lr_decay = LrDecay::none;
  c.beta1 = 0.9;
  return c;
}

bool TrainConfig::conditional_s2r_resolved() const {
  return conditional_s2r.value_or(mode == losses::Mode::label_cyclegan);
}
bool TrainConfig::conditional_r2s_resolved() const {
  return conditional_r2s.value_or(mode == losses::Mode::label_cyclegan);
}

void TrainConfig::validate() const {
  auto require = [](bool ok, const char* field, const std::string& what) {
    if (!ok) throw ConfigError(field, what);
  };
  require(epochs >= 0, "epochs", "must be non-negative");
  require(batch_size >= 1, "batch_size", "must be at least 1");
  require(std::isfinite(learning_rate) && learning_rate > 0, "learning_rate", "must be positive");
  require(beta1 >= 0 && beta1 < 1, "beta1", "must lie in [0, 1)");
  require(beta2 >= 0 && beta2 < 1, "beta2", "must lie in [0, 1)");
  require(eps > 0, "eps", "must be positive");
  require(pool_size >= 0, "pool_size", "must be non-negative");
  require(max_steps_per_epoch >= 0, "max_steps_per_epoch", "must be non-negative");
  for (int c : minor_classes) require(c >= 0, "minor_classes", "class indices must be non-negative");
  try {
    weights.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError("weights", e.what());
  }
  const auto w = weights;
  if (mode != losses::Mode::simgan) require(w.lambda_cyc.has_value(), "weights", "lambda_cyc is required");
  if (mode == losses::Mode::label_cyclegan)
    require(w.lambda_lab_r && w.lambda_lab_s, "weights", "lambda_lab_r and lambda_lab_s are required");
  if (mode == losses::Mode::simgan) {
    require(w.lambda_selfreg.has_value(), "weights", "lambda_selfreg is required");
    require(!conditional_r2s.value_or(false), "conditional_r2s", "simgan has no real-to-simulated generator");
  }
  for (auto [v, field] : {std::pair{generator_channels, "generator_channels"},
                          std::pair{discriminator_channels, "discriminator_channels"},
                          std::pair{classifier_conv1, "classifier_conv1"},
                          std::pair{classifier_conv2, "classifier_conv2"}})
    require(v >= 1, field, "must be at least 1");
  require(downsample_stages >= 0 && downsample_stages <= 4, "downsample_stages", "must lie in [0, 4]");
  require(residual_blocks >= 0, "residual_blocks", "must be non-negative");
  require(discriminator_stages >= 1 && discriminator_stages <= 4, "discriminator_stages", "must lie in [1, 4]");
}

namespace {

json weights_json(const losses::LossWeights& w) {
  json j = json::object();
  auto put = [&](const char* k, const std::optional<double>& v) {
    if (v) j[k] = *v;
  };
  put("lambda_cyc", w.lambda_cyc);
  put("lambda_lab_r", w.lambda_lab_r);
  put("lambda_lab_s", w.lambda_lab_s);
  put("lambda_selfreg", w.lambda_selfreg);
  return j;
}

template <typename V>
V field(const json& j, const char* key) {
  try {
    return j.at(key).get<V>();
  } catch (const json::exception& e) {
    throw ConfigError(key, e.what());
  }
}

}  // namespace

json to_json(const TrainConfig& c) {
  json j{{"mode", losses::to_string(c.mode)},
         {"epochs", c.epochs},
         {"batch_size", c.batch_size},
         {"learning_rate", c.learning_rate},
         {"lr_decay", to_string(c.lr_decay)},
         {"beta1", c.beta1},
         {"beta2", c.beta2},
         {"eps", c.eps},
         {"weights", weights_json(c.weights)},
         {"adversarial", losses::to_string(c.adversarial)},
         {"minor_classes", c.minor_classes},
         {"exclude_minor_from_label_loss", c.exclude_minor_from_label_loss},
         {"drop_minor_from_gan_batches", c.drop_minor_from_gan_batches},
         {"seed", c.seed},
         {"pool_size", c.pool_size},
         {"max_steps_per_epoch", c.max_steps_per_epoch},
         {"generator_channels", c.generator_channels},
         {"downsample_stages", c.downsample_stages},
         {"residual_blocks", c.residual_blocks},
         {"discriminator_channels", c.discriminator_channels},
         {"discriminator_stages", c.discriminator_stages},
         {"classifier_conv1", c.classifier_conv1},
         {"classifier_conv2", c.classifier_conv2}};
  j["conditional_s2r"] = c.conditional_s2r ? json(*c.conditional_s2r) : json(nullptr);
  j["conditional_r2s"] = c.conditional_r2s ? json(*c.conditional_r2s) : json(nullptr);
  return j;
}

TrainConfig train_config_from_json(const json& j, const TrainConfig& base) {
  if (!j.is_object()) throw ConfigError("<config>", "expected a JSON object");
  TrainConfig c = base;
  for (const auto& [key, value] : j.items()) {
    const char* k = key.c_str();
    try {
      if (key == "mode") c.mode = losses::mode_from_string(field<std::string>(j, k));
      else if (key == "epochs") c.epochs = field<int>(j, k);
      else if (key == "batch_size") c.batch_size = field<int>(j, k);
      else if (key == "learning_rate") c.learning_rate = field<double>(j, k);
      else if (key == "lr_decay") c.lr_decay = lr_decay_from_string(field<std::string>(j, k));
      else if (key == "beta1") c.beta1 = field<double>(j, k);
      else if (key == "beta2") c.beta2 = field<double>(j, k);
      else if (key == "eps") c.eps = field<double>(j, k);
      else if (key == "adversarial") c.adversarial = losses::adversarial_form_from_string(field<std::string>(j, k));
      else if (key == "minor_classes") c.minor_classes = field<std::set<int>>(j, k);
      else if (key == "exclude_minor_from_label_loss") c.exclude_minor_from_label_loss = field<bool>(j, k);
      else if (key == "drop_minor_from_gan_batches") c.drop_minor_from_gan_batches = field<bool>(j, k);
      else if (key == "seed") c.seed = field<std::uint64_t>(j, k);
      else if (key == "pool_size") c.pool_size = field<int>(j, k);
      else if (key == "max_steps_per_epoch") c.max_steps_per_epoch = field<int>(j, k);
      else if (key == "generator_channels") c.generator_channels = field<int>(j, k);
      else if (key == "downsample_stages") c.downsample_stages = field<int>(j, k);
      else if (key == "residual_blocks") c.residual_blocks = field<int>(j, k);
      else if (key == "discriminator_channels") c.discriminator_channels = field<int>(j, k);
      else if (key == "discriminator_stages") c.discriminator_stages = field<int>(j, k);
      else if (key == "classifier_conv1") c.classifier_conv1 = field<int>(j, k);
      else if (key == "classifier_conv2") c.classifier_conv2 = field<int>(j, k);
      else if (key == "conditional_s2r" || key == "conditional_r2s") {
        std::optional<bool> v;
        if (!value.is_null()) v = field<bool>(j, k);
        (key == "conditional_s2r" ? c.conditional_s2r : c.conditional_r2s) = v;
      } else if (key == "weights") {
        if (!value.is_object()) throw ConfigError("weights", "expected an object");
        for (const auto& [wk, wv] : value.items()) {
          std::optional<double>* slot = nullptr;
          if (wk == "lambda_cyc") slot = &c.weights.lambda_cyc;
          else if (wk == "lambda_lab_r") slot = &c.weights.lambda_lab_r;
          else if (wk == "lambda_lab_s") slot = &c.weights.lambda_lab_s;
          else if (wk == "lambda_selfreg") slot = &c.weights.lambda_selfreg;
          else throw ConfigError("weights." + wk, "unknown weight");
          if (wv.is_null()) slot->reset();
          else if (wv.is_number()) *slot = wv.get<double>();
          else throw ConfigError("weights." + wk, "expected a number");
        }
      } else {
        throw ConfigError(key, "unknown field");
      }
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& e) {
      throw ConfigError(key, e.what());
    }
  }
  c.validate();
  return c;
}

std::string config_hash(const json& j) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : j.dump()) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string config_hash(const TrainConfig& c) { return config_hash(to_json(c)); }

}  // namespace lcgan::training
