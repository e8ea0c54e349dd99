#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "lcgan/core/error.hpp"

namespace lcgan {

/// NHWC batch shape. Dense activations use h = w = 1.
struct Shape {
  int n = 0;
  int h = 0;
  int w = 0;
  int c = 0;

  std::size_t count() const {
    return static_cast<std::size_t>(n) * static_cast<std::size_t>(h) * static_cast<std::size_t>(w) *
           static_cast<std::size_t>(c);
  }
  std::size_t item_size() const {
    return static_cast<std::size_t>(h) * static_cast<std::size_t>(w) * static_cast<std::size_t>(c);
  }
  Shape with_batch(int batch) const { return {batch, h, w, c}; }
  bool operator==(const Shape&) const = default;
  std::string str() const {
    return "(" + std::to_string(n) + "x" + std::to_string(h) + "x" + std::to_string(w) + "x" +
           std::to_string(c) + ")";
  }
};

/// Height x width x channels of a single image.
struct ImageShape {
  int h = 32;
  int w = 32;
  int c = 3;
  bool operator==(const ImageShape&) const = default;
  Shape batch(int n) const { return {n, h, w, c}; }
  std::size_t size() const { return static_cast<std::size_t>(h) * w * c; }
};

template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T(0)) : shape_(shape), data_(shape.count(), fill) {}
  Tensor(Shape shape, std::vector<T> data) : shape_(shape), data_(std::move(data)) {
    if (data_.size() != shape_.count())
      throw ShapeError("tensor data size " + std::to_string(data_.size()) + " does not match shape " +
                       shape_.str());
  }

  const Shape& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }
  std::vector<T>& storage() { return data_; }
  const std::vector<T>& storage() const { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  std::size_t offset(int n, int h, int w, int c) const {
    return ((static_cast<std::size_t>(n) * shape_.h + h) * shape_.w + w) * shape_.c + c;
  }
  T& at(int n, int h, int w, int c) { return data_[offset(n, h, w, c)]; }
  const T& at(int n, int h, int w, int c) const { return data_[offset(n, h, w, c)]; }

  T* item(int n) { return data_.data() + static_cast<std::size_t>(n) * shape_.item_size(); }
  const T* item(int n) const { return data_.data() + static_cast<std::size_t>(n) * shape_.item_size(); }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  /// Same data viewed under a different shape with equal element count.
  Tensor reshaped(Shape s) const& { return Tensor(s, data_); }
  Tensor reshaped(Shape s) && { return Tensor(s, std::move(data_)); }

  template <typename U>
  Tensor<U> cast() const {
    std::vector<U> out(data_.begin(), data_.end());
    return Tensor<U>(shape_, std::move(out));
  }

  bool operator==(const Tensor&) const = default;

 private:
  Shape shape_{};
  std::vector<T> data_;
};

inline void require_same_shape(const Shape& a, const Shape& b, const char* what) {
  if (!(a == b)) throw ShapeError(std::string(what) + ": shape " + a.str() + " vs " + b.str());
}

}  // namespace lcgan
