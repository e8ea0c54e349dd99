#pragma once

// Settings for one training phase (classifier pretraining, GAN training or
// classifier retraining). JSON keys equal the member names.

#include <cstdint>
#include <optional>
#include <set>
#include <string>

#include <nlohmann/json.hpp>

#include "lcgan/losses/losses.hpp"
#include "lcgan/training/optimizer.hpp"

namespace lcgan::training {

struct TrainConfig {
  losses::Mode mode = losses::Mode::label_cyclegan;
  int epochs = 20;
  int batch_size = 16;
  double learning_rate = 2e-4;
  LrDecay lr_decay = LrDecay::linear_after_half;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;
  losses::LossWeights weights = losses::LossWeights::defaults();
  losses::AdversarialForm adversarial = losses::AdversarialForm::least_squares;
  std::set<int> minor_classes;
  // Masks minor-class items out of the label loss.
  bool exclude_minor_from_label_loss = true;
  // Removes minor-class items from the GAN's training corpora altogether.
  bool drop_minor_from_gan_batches = false;
  std::uint64_t seed = 0;
  int pool_size = 50;
  // Label-map embedding per generator; unset means "on in label_cyclegan
  // mode, off otherwise".
  std::optional<bool> conditional_s2r;
  std::optional<bool> conditional_r2s;
  // Caps an epoch at this many steps; 0 uses the full epoch.
  int max_steps_per_epoch = 0;

  // Architecture knobs.
  int generator_channels = 32;
  int downsample_stages = 2;
  int residual_blocks = 3;
  int discriminator_channels = 32;
  int discriminator_stages = 3;
  int classifier_conv1 = 16;
  int classifier_conv2 = 32;

  /// GAN phase: lr 2e-4, beta1 0.5, linear decay after half.
  static TrainConfig gan_defaults();
  /// Classifier phases: lr 1e-3, beta1 0.9, batch 32, no decay.
  static TrainConfig classifier_defaults();

  bool conditional_s2r_resolved() const;
  bool conditional_r2s_resolved() const;
  AdamSettings adam() const { return {beta1, beta2, eps}; }

  /// Throws ConfigError naming the first invalid field.
  void validate() const;
};

nlohmann::json to_json(const TrainConfig& c);
/// Starts from `base` and overrides the keys present; unknown keys and bad
/// values raise ConfigError naming the key.
TrainConfig train_config_from_json(const nlohmann::json& j, const TrainConfig& base = TrainConfig::gan_defaults());

/// 16 hex digits identifying the config (FNV-1a over its canonical JSON).
std::string config_hash(const TrainConfig& c);
std::string config_hash(const nlohmann::json& j);

}  // namespace lcgan::training
