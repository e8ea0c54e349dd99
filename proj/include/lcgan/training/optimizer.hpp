#pragma once

// Adam with bias correction, the learning-rate schedules and the history pool
// of generated images that discriminators train on.

#include <cstdint>
#include <string>
#include <vector>

#include "lcgan/core/archive.hpp"
#include "lcgan/core/rng.hpp"
#include "lcgan/nn/param.hpp"

namespace lcgan::training {

enum class LrDecay { none, linear_after_half };

std::string to_string(LrDecay d);
LrDecay lr_decay_from_string(const std::string& s);

/// Learning rate for 1-based epoch e of E. linear_after_half keeps the base
/// rate through epoch E/2 (integer division), then scales it by
/// 1 - (e - E/2) / (E - E/2 + 1), reaching base / (E - E/2 + 1) at e = E.
double scheduled_lr(double base, LrDecay decay, int epoch, int total_epochs);

struct AdamSettings {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First and second moment estimates per parameter tensor. A parameter with
/// no gradient slot is left untouched for that step.
template <typename T>
class Adam {
 public:
  Adam(std::vector<nn::NamedParam<T>> params, AdamSettings settings);

  /// Throws NumericError naming the parameter if any gradient is non-finite;
  /// nothing is updated in that case.
  void step(const nn::Gradients<T>& grads, double lr);

  std::int64_t steps() const { return t_; }
  const AdamSettings& settings() const { return settings_; }
  const std::vector<nn::NamedParam<T>>& params() const { return params_; }

  /// Moments as "<prefix>/m/<param>" and "<prefix>/v/<param>"; the step
  /// count goes into metadata["adam"][prefix].
  void store(TensorArchive& ar, const std::string& prefix) const;
  void load(const TensorArchive& ar, const std::string& prefix);

 private:
  std::vector<nn::NamedParam<T>> params_;
  std::vector<std::vector<T>> m_;
  std::vector<std::vector<T>> v_;
  AdamSettings settings_;
  std::int64_t t_ = 0;
};

/// Holds up to `capacity` previously generated images. Until full, every
/// query image is stored and returned as is; afterwards each image is, with
/// probability 1/2, swapped for a uniformly chosen stored one (which it
/// replaces), and otherwise returned unchanged. Capacity 0 is a passthrough.
class ImagePool {
 public:
  ImagePool(std::size_t capacity, std::uint64_t seed) : capacity_(capacity), rng_(seed) {}

  /// Returns a batch of the same shape.
  Tensor<float> query(const Tensor<float>& batch);

  std::size_t size() const { return stored_.size(); }
  std::size_t capacity() const { return capacity_; }

  /// Contents as "<name>" (n x h x w x c) plus RNG state in metadata.
  void store(TensorArchive& ar, const std::string& name) const;
  void load(const TensorArchive& ar, const std::string& name);

 private:
  std::size_t capacity_;
  Rng rng_;
  Shape item_shape_{};
  std::vector<std::vector<float>> stored_;
};

}  // namespace lcgan::training
