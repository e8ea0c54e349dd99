#pragma once

// Adversarial training of the domain generators (CycleGAN, label-conditional
// CycleGAN and SimGAN-style refinement) and corpus transformation.

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <ostream>
#include <span>

#include "lcgan/data/corpus.hpp"
#include "lcgan/data/sampling.hpp"
#include "lcgan/losses/losses.hpp"
#include "lcgan/models/networks.hpp"
#include "lcgan/training/config.hpp"
#include "lcgan/training/optimizer.hpp"

namespace lcgan::training {

/// Networks that take part in one generator objective evaluation. r2s, d_s
/// are null in simgan mode; the classifiers are needed in label_cyclegan
/// mode only.
template <typename T>
struct GanNets {
  const models::Generator<T>* s2r = nullptr;
  const models::Generator<T>* r2s = nullptr;
  const models::Discriminator<T>* d_r = nullptr;
  const models::Discriminator<T>* d_s = nullptr;
  const models::Classifier<T>* f_r = nullptr;
  const models::Classifier<T>* f_s = nullptr;
};

/// Generator outputs for one (real, simulated) batch pair, with tapes.
///   fake_r = G_s2r(x_s, y_s)    rec_s = G_r2s(fake_r, y_s)
///   fake_s = G_r2s(x_r, y_r)    rec_r = G_s2r(fake_s, y_r)
/// In simgan mode only fake_r (the refined batch) is produced.
template <typename T>
struct GeneratorPass {
  Tensor<T> fake_r, rec_s, fake_s, rec_r;
  nn::Tape<T> tape_fake_r, tape_rec_s, tape_fake_s, tape_rec_r;
};

struct ObjectiveSettings {
  losses::Mode mode = losses::Mode::label_cyclegan;
  losses::LossWeights weights = losses::LossWeights::defaults();
  losses::AdversarialForm adversarial = losses::AdversarialForm::least_squares;
  losses::ClassSet exclude;  // classes masked out of the label losses
};

template <typename T>
GeneratorPass<T> run_generators(const GanNets<T>& nets, const Tensor<T>& x_r, std::span<const int> y_r,
                                const Tensor<T>& x_s, std::span<const int> y_s, losses::Mode mode, bool record);

/// Evaluates every loss component for the generators and, when grads is
/// non-null, accumulates the gradient of the weighted total into the
/// generator parameters' slots (discriminators and classifiers stay frozen).
template <typename T>
losses::LossReport generator_objective(const GanNets<T>& nets, GeneratorPass<T>& pass, const Tensor<T>& x_r,
                                       std::span<const int> y_r, const Tensor<T>& x_s, std::span<const int> y_s,
                                       const ObjectiveSettings& s, nn::Gradients<T>* grads);

/// 0.5 * (adv(D(real), real) + adv(D(fake), fake)); gradients go to D.
template <typename T>
double discriminator_objective(const models::Discriminator<T>& d, const Tensor<T>& real, const Tensor<T>& fake,
                               losses::AdversarialForm form, nn::Gradients<T>* grads);

struct TrainHooks {
  std::ostream* log = nullptr;             // JSONL: one LossReport per step, one summary per epoch
  std::filesystem::path checkpoint_dir;    // empty: no checkpoints
  std::function<void(int epoch)> on_epoch;
};

class GanTrainer {
 public:
  /// The classifiers must outlive the trainer and are never modified. They
  /// are required in label_cyclegan mode.
  GanTrainer(const TrainConfig& cfg, const data::Corpus& real, const data::Corpus& sim,
             const models::Classifier<float>* f_r = nullptr, const models::Classifier<float>* f_s = nullptr);
  GanTrainer(const GanTrainer&) = delete;
  GanTrainer& operator=(const GanTrainer&) = delete;

  /// One update: D_r, D_s on pooled fakes, then the generators jointly.
  losses::LossReport step();
  /// Runs the remaining steps of all configured epochs.
  void train(const TrainHooks& hooks = {});

  std::size_t steps_per_epoch() const { return steps_per_epoch_; }
  std::size_t steps_done() const { return steps_; }
  int epochs_done() const { return static_cast<int>(steps_ / steps_per_epoch_); }
  double current_lr() const;

  void save_checkpoint(const std::filesystem::path& path) const;
  /// Restores everything save_checkpoint wrote; the config must hash equal.
  void load_checkpoint(const std::filesystem::path& path);

  models::Generator<float>& s2r() { return *g_s2r_; }
  models::Generator<float>* r2s() { return g_r2s_ ? &*g_r2s_ : nullptr; }
  models::Discriminator<float>& d_r() { return *d_r_; }
  models::Discriminator<float>* d_s() { return d_s_ ? &*d_s_ : nullptr; }
  const TrainConfig& config() const { return cfg_; }
  GanNets<float> nets() const;

 private:
  TrainConfig cfg_;
  data::Corpus real_, sim_;
  const models::Classifier<float>* f_r_;
  const models::Classifier<float>* f_s_;
  std::optional<models::Generator<float>> g_s2r_, g_r2s_;
  std::optional<models::Discriminator<float>> d_r_, d_s_;
  std::unique_ptr<Adam<float>> opt_g_, opt_dr_, opt_ds_;
  ImagePool pool_r_, pool_s_;
  std::unique_ptr<data::PairedDomainStream> stream_;
  std::size_t steps_per_epoch_ = 1;
  std::size_t steps_ = 0;
  ObjectiveSettings objective_;
};

/// Maps every item through g (conditioned on its own label when g is
/// conditional). Labels are kept; the domain flag flips. Throws when the
/// corpus is not in g's input domain or the label channels do not match.
data::Corpus transform_corpus(const models::Generator<float>& g, const data::Corpus& corpus, std::size_t batch = 64);

}  // namespace lcgan::training
