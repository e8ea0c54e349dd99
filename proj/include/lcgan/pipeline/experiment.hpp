#pragma once

// The end-to-end protocol: build corpora, pretrain the domain classifiers,
// train a GAN per method, transform the simulated training split, retrain a
// real-domain classifier on mixed batches and evaluate it against a
// no-augmentation baseline. Every artifact lives under
// <out>/seed_<s>/{checkpoints,logs,reports,grids}.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lcgan/data/corpus.hpp"
#include "lcgan/data/sampling.hpp"
#include "lcgan/eval/metrics.hpp"
#include "lcgan/losses/losses.hpp"
#include "lcgan/training/config.hpp"

namespace lcgan::pipeline {

/// A phase failed; the message carries the phase name.
class PhaseError : public Error {
 public:
  PhaseError(std::string phase, const std::string& what)
      : Error("phase '" + phase + "' failed: " + what), phase_(std::move(phase)) {}
  const std::string& phase() const noexcept { return phase_; }

 private:
  std::string phase_;
};

/// Shorthand for the six synthetic corpora (real/simulated x train/val/test).
struct SyntheticData {
  int class_count = 3;
  ImageShape image{32, 32, 3};
  int train_per_class = 300;
  int val_per_class = 100;
  int test_per_class = 100;
  std::uint64_t seed = 7;
};

struct ExperimentConfig {
  std::filesystem::path out_dir = "runs/desk";
  std::vector<std::uint64_t> seeds{1};
  std::vector<losses::Mode> methods{losses::Mode::label_cyclegan, losses::Mode::cyclegan};
  // Exactly one of these: manifest paths keyed real_train ... simulated_test,
  // or the synthetic shorthand.
  std::map<std::string, std::filesystem::path> manifests;
  std::optional<SyntheticData> synthetic;
  data::ImbalanceSpec imbalance;
  // The run seed replaces each phase's seed, and the GAN's minor_classes
  // come from `imbalance`.
  training::TrainConfig pretrain_r = training::TrainConfig::classifier_defaults();
  training::TrainConfig pretrain_s = training::TrainConfig::classifier_defaults();
  training::TrainConfig gan = training::TrainConfig::gan_defaults();
  training::TrainConfig retrain = training::TrainConfig::classifier_defaults();
  bool strict = true;
  int grid_items_per_class = 2;

  /// Throws ConfigError naming the first invalid field.
  void validate() const;
};

/// Keys in dotted form ("gan.epochs"); unknown keys are errors. Relative
/// paths resolve against base_dir.
ExperimentConfig experiment_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
nlohmann::json to_json(const ExperimentConfig& c);
/// TOML with the same structure as the JSON form.
ExperimentConfig load_experiment_config(const std::filesystem::path& path);
ExperimentConfig experiment_config_from_toml(const std::string& text, const std::filesystem::path& base_dir = {});

/// real_train, real_val, real_test, simulated_train, simulated_val, simulated_test.
const std::vector<std::string>& corpus_keys();

struct DataSet {
  std::map<std::string, data::Corpus> corpora;
  const data::Corpus& at(const std::string& key) const;
};

struct SeedPaths {
  std::filesystem::path root, checkpoints, logs, reports, grids;
};

struct MethodResult {
  std::string method;  // "baseline" or a GAN mode
  eval::EvalReport report;
  // Label preservation of G_s2r on the simulated test split, judged by a
  // classifier trained on balanced real data and by f_r.
  std::optional<eval::Preservation> judge;
  std::optional<eval::Preservation> f_r;
};

struct SeedResult {
  std::uint64_t seed = 0;
  double f_r_heldout = 0, f_s_heldout = 0, judge_heldout = 0;
  std::vector<MethodResult> methods;  // baseline first

  const MethodResult& method(const std::string& name) const;
};

std::string method_name(losses::Mode m);

class Experiment {
 public:
  /// `log` receives progress lines; with force, finished phases rerun.
  explicit Experiment(ExperimentConfig cfg, std::ostream* log = nullptr, bool force = false);

  const ExperimentConfig& config() const { return cfg_; }
  SeedPaths paths(std::uint64_t seed) const;

  /// Writes <out>/data/<key>.corpus and .manifest.json. Returns false when
  /// everything was already up to date.
  bool build_data();
  const DataSet& data();
  /// Real training split with the configured imbalance (subsample drawn with
  /// the run seed).
  data::Corpus real_train_imbalanced(std::uint64_t seed);

  /// f_r on the imbalanced real split, f_s on the simulated split and the
  /// judge (pretrain_r settings) on the balanced real split; held-out
  /// accuracy on the val splits.
  void pretrain(std::uint64_t seed);
  void train(std::uint64_t seed, losses::Mode mode);
  void transform(std::uint64_t seed, losses::Mode mode);
  /// method "baseline" trains on real items only.
  MethodResult retrain(std::uint64_t seed, const std::string& method);
  /// Re-evaluates a retrained classifier and rewrites its report.
  MethodResult evaluate(std::uint64_t seed, const std::string& method);

  SeedResult run_seed(std::uint64_t seed);
  /// All seeds, then summary.csv and report.md in the output directory.
  std::vector<SeedResult> run();
  /// Regenerates grids, summary.csv and report.md from saved artifacts.
  void report();

  training::TrainConfig phase_config(const training::TrainConfig& base, std::uint64_t seed) const;

 private:
  void note(const std::string& line) const;
  training::TrainConfig gan_config(std::uint64_t seed, losses::Mode mode) const;
  MethodResult evaluate_saved(std::uint64_t seed, const std::string& method);
  void write_grid(std::uint64_t seed);
  void write_summary(const std::vector<SeedResult>& results);

  ExperimentConfig cfg_;
  std::ostream* log_;
  bool force_;
  std::optional<DataSet> data_;
};

/// Reads back a finished seed's reports (reports/<method>.json).
SeedResult load_seed_result(const ExperimentConfig& cfg, std::uint64_t seed);

}  // namespace lcgan::pipeline
