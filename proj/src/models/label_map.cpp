#include "lcgan/models/label_map.hpp"

#include <cstring>
#include <string>

namespace lcgan::models {

template <typename T>
Tensor<T> embed_label_map(const Tensor<T>& bottleneck, std::span<const int> labels, int n) {
  if (n < 0) throw InvalidArgument("embed_label_map: negative label channel count");
  const Shape& s = bottleneck.shape();
  if (labels.size() != static_cast<std::size_t>(s.n))
    throw InvalidArgument("embed_label_map: " + std::to_string(labels.size()) + " labels for batch of " +
                          std::to_string(s.n));
  for (int y : labels)
    if (n > 0 && (y < 0 || y >= n))
      throw InvalidArgument("embed_label_map: label " + std::to_string(y) + " outside [0, " + std::to_string(n) + ")");
  if (n == 0) return bottleneck;

  const int c_out = s.c + n;
  Tensor<T> out(Shape{s.n, s.h, s.w, c_out});
  const std::size_t positions = static_cast<std::size_t>(s.h) * s.w;
  for (int i = 0; i < s.n; ++i) {
    const T* src = bottleneck.item(i);
    T* dst = out.item(i);
    for (std::size_t p = 0; p < positions; ++p) {
      if (s.c > 0) std::memcpy(dst + p * c_out, src + p * s.c, sizeof(T) * static_cast<std::size_t>(s.c));
      dst[p * c_out + s.c + labels[i]] = T(1);
    }
  }
  return out;
}

template <typename T>
Tensor<T> strip_label_channels(const Tensor<T>& grad, int n) {
  if (n == 0) return grad;
  const Shape& s = grad.shape();
  const int c = s.c - n;
  if (c < 0) throw ShapeError("strip_label_channels: fewer channels than label channels");
  Tensor<T> out(Shape{s.n, s.h, s.w, c});
  const std::size_t rows = static_cast<std::size_t>(s.n) * s.h * s.w;
  for (std::size_t p = 0; p < rows; ++p)
    std::memcpy(out.data() + p * c, grad.data() + p * s.c, sizeof(T) * static_cast<std::size_t>(c));
  return out;
}

template Tensor<float> embed_label_map(const Tensor<float>&, std::span<const int>, int);
template Tensor<double> embed_label_map(const Tensor<double>&, std::span<const int>, int);
template Tensor<float> strip_label_channels(const Tensor<float>&, int);
template Tensor<double> strip_label_channels(const Tensor<double>&, int);

}  // namespace lcgan::models
