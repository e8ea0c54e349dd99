#pragma once

// The three network families: label-conditional encoder-decoder generators,
// patch discriminators and small CNN classifiers.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lcgan/core/rng.hpp"
#include "lcgan/core/tensor.hpp"
#include "lcgan/nn/layers.hpp"

namespace lcgan::models {

enum class Direction { s2r, r2s };
enum class DomainSide { real_side, sim_side };

std::string to_string(Direction d);
std::string to_string(DomainSide d);

struct GeneratorArch {
  ImageShape image;
  int base_channels = 32;    // bottleneck has 4 * base_channels at 2 stages
  int downsample_stages = 2;
  int residual_blocks = 3;
  int label_channels = 0;    // n; 0 is the unconditional generator
  double init_std = 0.02;
  Direction direction = Direction::s2r;
  // Empty encoder and decoder: output equals input. Plumbing tests only.
  bool passthrough = false;

  int bottleneck_channels() const { return base_channels << downsample_stages; }
  int downsample_factor() const { return 1 << downsample_stages; }
};

struct DiscriminatorArch {
  ImageShape image;
  int base_channels = 32;
  int stages = 3;
  double init_std = 0.02;
  double slope = 0.2;
  DomainSide side = DomainSide::real_side;
};

struct ClassifierArch {
  ImageShape image;
  int classes = 10;
  int conv1_channels = 16;
  int conv2_channels = 32;
  double init_std = 0.02;
  DomainSide side = DomainSide::real_side;
};

nlohmann::json to_json(const GeneratorArch& a);
nlohmann::json to_json(const DiscriminatorArch& a);
nlohmann::json to_json(const ClassifierArch& a);
GeneratorArch generator_arch_from_json(const nlohmann::json& j);
DiscriminatorArch discriminator_arch_from_json(const nlohmann::json& j);
ClassifierArch classifier_arch_from_json(const nlohmann::json& j);

/// Encoder (stem, stride-2 downsampling, residual blocks) -> label-map
/// concatenation -> decoder (label fusion conv, nearest upsampling stages,
/// tanh output). The fusion conv that first sees the label map has no
/// normalization after it, so a spatially constant label signal is not
/// removed by instance normalization.
template <typename T>
class Generator {
 public:
  Generator(const GeneratorArch& arch, Rng& rng);

  /// labels must be supplied (one per item) iff label_channels > 0.
  Tensor<T> forward(const Tensor<T>& x, std::span<const int> labels, nn::Tape<T>* tape) const;
  /// Returns the gradient with respect to the input image batch.
  Tensor<T> backward(const Tensor<T>& gy, nn::Tape<T>& tape, nn::Gradients<T>* grads) const;

  // Exposed halves, used to check the unconditional path directly.
  Tensor<T> encode(const Tensor<T>& x, nn::Tape<T>* tape) const { return encoder_.forward(x, tape); }
  Tensor<T> decode(const Tensor<T>& h, nn::Tape<T>* tape) const { return decoder_.forward(h, tape); }

  std::vector<nn::NamedParam<T>> params();
  const GeneratorArch& arch() const { return arch_; }
  bool conditional() const { return arch_.label_channels > 0; }

 private:
  GeneratorArch arch_;
  nn::Sequential<T> encoder_;
  nn::Sequential<T> decoder_;
};

/// Strided conv stages (no normalization on the first) and a 1-channel score
/// head; emits one raw score per receptive-field patch.
template <typename T>
class Discriminator {
 public:
  Discriminator(const DiscriminatorArch& arch, Rng& rng);

  Tensor<T> forward(const Tensor<T>& x, nn::Tape<T>* tape) const;
  Tensor<T> backward(const Tensor<T>& gy, nn::Tape<T>& tape, nn::Gradients<T>* grads) const;

  /// Score-map shape for a batch of n images.
  Shape score_shape(int n) const { return body_.output_shape(arch_.image.batch(n)); }
  std::vector<nn::NamedParam<T>> params();
  const DiscriminatorArch& arch() const { return arch_; }

 private:
  DiscriminatorArch arch_;
  nn::Sequential<T> body_;
};

/// Two conv + ReLU + 2x2 max-pool stages and a dense layer to K logits.
template <typename T>
class Classifier {
 public:
  Classifier(const ClassifierArch& arch, Rng& rng);

  /// Output shape (n, 1, 1, K). Throws NumericError on non-finite parameters.
  Tensor<T> forward(const Tensor<T>& x, nn::Tape<T>* tape) const;
  Tensor<T> backward(const Tensor<T>& gy, nn::Tape<T>& tape, nn::Gradients<T>* grads) const;

  std::vector<nn::NamedParam<T>> params();
  const ClassifierArch& arch() const { return arch_; }
  int classes() const { return arch_.classes; }

 private:
  void check_finite() const;

  ClassifierArch arch_;
  nn::Sequential<T> body_;
};

/// Argmax per row of an (n,1,1,K) logit batch; ties go to the lower index.
template <typename T>
std::vector<int> argmax_rows(const Tensor<T>& logits);

/// Total parameter count of a parameter list.
template <typename T>
std::size_t parameter_count(const std::vector<nn::NamedParam<T>>& params) {
  std::size_t n = 0;
  for (const auto& p : params) n += p.value->size();
  return n;
}

}  // namespace lcgan::models
