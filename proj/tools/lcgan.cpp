// Command-line front end for the experiment pipeline.
//
//   lcgan data build --config desk.toml
//   lcgan pipeline   --config desk.toml --mode label_cyclegan,cyclegan --seeds 1,2,3
//   lcgan report     runs/desk
//
// Exit codes: 0 success, 1 a phase failed, 2 bad arguments or config.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lcgan/pipeline/experiment.hpp"
#include "lcgan/simd/kernels.hpp"

namespace fs = std::filesystem;
using namespace lcgan;

namespace {

struct Options {
  std::string config;
  std::string out;
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> modes;
  bool force = false;
  std::string run_dir;
};

void add_common(CLI::App* cmd, Options& o, bool many) {
  cmd->add_option("--config", o.config, "experiment config (TOML)")->check(CLI::ExistingFile);
  cmd->add_option("--out", o.out, "output directory (overrides the config)");
  if (many) {
    cmd->add_option("--seeds", o.seeds, "comma-separated seed roster")->delimiter(',');
    cmd->add_option("--mode", o.modes, "comma-separated methods: label_cyclegan, cyclegan, simgan")->delimiter(',');
  } else {
    cmd->add_option("--seed", o.seeds, "run seed (default: first seed of the config)")->expected(1);
  }
  cmd->add_flag("--force", o.force, "rerun phases whose outputs are up to date");
}

pipeline::ExperimentConfig load_config(const Options& o) {
  if (o.config.empty()) throw ConfigError("config", "--config is required");
  auto cfg = pipeline::load_experiment_config(o.config);
  if (!o.out.empty()) cfg.out_dir = o.out;
  if (!o.seeds.empty()) cfg.seeds = o.seeds;
  if (!o.modes.empty()) {
    cfg.methods.clear();
    for (const auto& m : o.modes) cfg.methods.push_back(losses::mode_from_string(m));
  }
  cfg.validate();
  return cfg;
}

std::uint64_t one_seed(const pipeline::ExperimentConfig& cfg) { return cfg.seeds.front(); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Label-conditional CycleGAN experiments: data, training, transformation, retraining, reports"};
  app.require_subcommand(1);
  Options o;
  std::string method;

  auto* data = app.add_subcommand("data", "dataset commands");
  data->require_subcommand(1);
  auto* build = data->add_subcommand("build", "write the six corpora and their resolved manifests");
  add_common(build, o, false);

  auto* pretrain = app.add_subcommand("pretrain", "train f_r, f_s and the judge classifier for one seed");
  add_common(pretrain, o, false);
  auto* train = app.add_subcommand("train", "train one GAN for one seed (resumes from latest.ckpt)");
  add_common(train, o, false);
  train->add_option("--mode", method, "label_cyclegan, cyclegan or simgan")->required();
  auto* transform = app.add_subcommand("transform", "map the simulated training split through G_s2r");
  add_common(transform, o, false);
  transform->add_option("--mode", method, "label_cyclegan, cyclegan or simgan")->required();
  auto* retrain = app.add_subcommand("retrain", "train the real-domain classifier for one method");
  add_common(retrain, o, false);
  retrain->add_option("--mode", method, "baseline or a GAN mode")->required();
  auto* evaluate = app.add_subcommand("eval", "re-evaluate a retrained classifier");
  add_common(evaluate, o, false);
  evaluate->add_option("--mode", method, "baseline or a GAN mode")->required();

  auto* report = app.add_subcommand("report", "regenerate grids, summary.csv and report.md of a finished run");
  report->add_option("run_dir", o.run_dir, "output directory of a pipeline run")->required();

  auto* pipe = app.add_subcommand("pipeline", "data, pretraining, GAN training, transformation, retraining, report");
  add_common(pipe, o, true);

  auto* info = app.add_subcommand("info", "print the selected SIMD kernel set");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (info->parsed()) {
      std::cout << "kernels: " << simd::isa_name(simd::kernels().isa) << '\n';
      return 0;
    }
    if (report->parsed()) {
      const fs::path cfg_path = fs::path(o.run_dir) / "experiment.json";
      if (!fs::exists(cfg_path)) {
        std::cerr << "error: " << o.run_dir << " is not a finished run (no experiment.json); run `lcgan pipeline` first\n";
        return 1;
      }
      auto cfg = pipeline::load_experiment_config(cfg_path);
      cfg.out_dir = o.run_dir;
      pipeline::Experiment ex(cfg, &std::cerr);
      ex.report();
      std::cout << "wrote " << (cfg.out_dir / "report.md").string() << " and " << (cfg.out_dir / "summary.csv").string()
                << '\n';
      return 0;
    }

    const auto cfg = load_config(o);
    pipeline::Experiment ex(cfg, &std::cerr, o.force);
    if (build->parsed()) {
      if (!ex.build_data()) std::cout << "up to date\n";
      return 0;
    }
    if (pipe->parsed()) {
      ex.run();
      std::cout << "wrote " << (cfg.out_dir / "report.md").string() << '\n';
      return 0;
    }
    const auto seed = one_seed(cfg);
    if (pretrain->parsed()) ex.pretrain(seed);
    else if (train->parsed()) ex.train(seed, losses::mode_from_string(method));
    else if (transform->parsed()) ex.transform(seed, losses::mode_from_string(method));
    else if (retrain->parsed() || evaluate->parsed()) {
      if (method != "baseline") losses::mode_from_string(method);
      const auto r = retrain->parsed() ? ex.retrain(seed, method) : ex.evaluate(seed, method);
      std::cout << eval::to_json(r.report).dump(2) << '\n';
    }
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const pipeline::PhaseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
