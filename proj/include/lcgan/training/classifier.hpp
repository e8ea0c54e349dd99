#pragma once

// Supervised classifier training: domain classifiers for the label loss and
// the final classifiers trained with or without transformed data.

#include <ostream>
#include <vector>

#include "lcgan/data/corpus.hpp"
#include "lcgan/eval/metrics.hpp"
#include "lcgan/models/networks.hpp"
#include "lcgan/training/config.hpp"

namespace lcgan::training {

struct ClassifierRun {
  models::Classifier<float> net;
  std::vector<double> epoch_loss;  // mean training cross-entropy per epoch
  std::size_t steps = 0;
};

/// Architecture used for classifiers trained on `corpus` under `cfg`.
models::ClassifierArch classifier_arch(const TrainConfig& cfg, const data::Corpus& corpus, models::DomainSide side);

/// Trains on single-corpus batches with mean cross-entropy. Epoch 0 returns
/// the initialization. Throws when fewer than two classes are present.
ClassifierRun train_classifier(const data::Corpus& train, const TrainConfig& cfg, models::DomainSide side,
                               std::ostream* log = nullptr);

struct PretrainResult {
  ClassifierRun run;
  double heldout_accuracy = 0.0;
};

/// train_classifier followed by accuracy on the held-out corpus.
PretrainResult pretrain_classifier(const data::Corpus& train, const data::Corpus& heldout, const TrainConfig& cfg,
                                   models::DomainSide side, std::ostream* log = nullptr);

struct RetrainResult {
  ClassifierRun run;
  eval::EvalReport report;
  std::size_t items_from_real = 0;
  std::size_t items_from_transformed = 0;
  bool fell_back_to_real_only = false;
};

/// Fresh classifier on mixed batches: half real items, half transformed
/// items (an epoch ends when the smaller side has been seen once). An empty
/// transformed corpus is an error in strict mode; otherwise training falls
/// back to real-only batches with a warning on `log`. Evaluates on `test`.
RetrainResult retrain_classifier(const data::Corpus& real, const data::Corpus& transformed, const data::Corpus& test,
                                 const TrainConfig& cfg, bool strict = true, std::ostream* log = nullptr);

}  // namespace lcgan::training
