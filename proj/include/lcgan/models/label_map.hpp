#pragma once

#include <span>

#include "lcgan/core/tensor.hpp"

namespace lcgan::models {

/// Appends an h x w x n one-hot label map to each item of a bottleneck batch.
/// Output channels [0, c) are the input unchanged; channel c + labels[i] is 1
/// at every spatial position of item i and channels [c, c + n) are otherwise 0.
/// n = 0 returns the input unchanged.
template <typename T>
Tensor<T> embed_label_map(const Tensor<T>& bottleneck, std::span<const int> labels, int n);

/// Single-item form: bottleneck is h x w x c (batch of one).
template <typename T>
Tensor<T> embed_label_map(const Tensor<T>& bottleneck, int label, int n) {
  const int one[1] = {label};
  return embed_label_map(bottleneck, std::span<const int>(one, 1), n);
}

/// Gradient of embed_label_map with respect to its bottleneck input: the
/// first c channels of the incoming gradient.
template <typename T>
Tensor<T> strip_label_channels(const Tensor<T>& grad, int n);

}  // namespace lcgan::models
