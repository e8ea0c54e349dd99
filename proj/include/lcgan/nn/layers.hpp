#pragma once

// Feed-forward building blocks with hand-written backward passes.
//
// forward() is const and reentrant; when a tape is supplied it records what
// backward() needs. backward() pops that record, returns the gradient with
// respect to the layer input, and accumulates parameter gradients into
// `grads` when it is non-null (null means "input gradient only", used for
// frozen networks).

#include <memory>
#include <string>
#include <vector>

#include "lcgan/core/rng.hpp"
#include "lcgan/core/tensor.hpp"
#include "lcgan/nn/param.hpp"

namespace lcgan::nn {

template <typename T>
class Layer {
 public:
  virtual ~Layer() = default;
  virtual Tensor<T> forward(const Tensor<T>& x, Tape<T>* tape) const = 0;
  virtual Tensor<T> backward(const Tensor<T>& gy, Tape<T>& tape, Gradients<T>* grads) const = 0;
  virtual Shape output_shape(const Shape& in) const = 0;
  virtual void collect(const std::string& /*prefix*/, std::vector<NamedParam<T>>& /*out*/) {}
  virtual std::unique_ptr<Layer> clone() const = 0;
};

struct ConvSpec {
  int in_channels = 0;
  int out_channels = 0;
  int kernel = 3;
  int stride = 1;
  int pad = 1;

  int out_extent(int in) const { return (in + 2 * pad - kernel) / stride + 1; }
};

/// 2-D convolution with zero padding and bias. Weight layout is
/// [ky][kx][in][out], i.e. a (k*k*in) x out matrix.
template <typename T>
class Conv2d final : public Layer<T> {
 public:
  Conv2d(ConvSpec spec, Rng& rng, double init_std);
  Tensor<T> forward(const Tensor<T>& x, Tape<T>* tape) const override;
  Tensor<T> backward(const Tensor<T>& gy, Tape<T>& tape, Gradients<T>* grads) const override;
  Shape output_shape(const Shape& in) const override;
  void collect(const std::string& prefix, std::vector<NamedParam<T>>& out) override;
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Conv2d>(*this); }

  const ConvSpec& spec() const { return spec_; }
  Tensor<T>& weight() { return weight_; }
  Tensor<T>& bias() { return bias_; }

 private:
  ConvSpec spec_;
  Tensor<T> weight_;
  Tensor<T> bias_;
};

/// Per-sample, per-channel normalization over spatial positions (no affine).
template <typename T>
class InstanceNorm final : public Layer<T> {
 public:
  explicit InstanceNorm(double eps = 1e-5) : eps_(eps) {}
  Tensor<T> forward(const Tensor<T>& x, Tape<T>* tape) const override;
  Tensor<T> backward(const Tensor<T>& gy, Tape<T>& tape, Gradients<T>* grads) const override;
  Shape output_shape(const Shape& in) const override { return in; }
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<InstanceNorm>(*this); }

 private:
  double eps_;
};

/// max(x, slope * x); slope 0 is ReLU.
template <typename T>
class LeakyRelu final : public Layer<T> {
 public:
  explicit LeakyRelu(double slope) : slope_(static_cast<T>(slope)) {}
  Tensor<T> forward(const Tensor<T>& x, Tape<T>* tape) const override;
  Tensor<T> backward(const Tensor<T>& gy, Tape<T>& tape, Gradients<T>* grads) const override;
  Shape output_shape(const Shape& in) const override { return in; }
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<LeakyRelu>(*this); }

 private:
  T slope_;
};

template <typename T>
class Tanh final : public Layer<T> {
 public:
  Tensor<T> forward(const Tensor<T>& x, Tape<T>* tape) const override;
  Tensor<T> backward(const Tensor<T>& gy, Tape<T>& tape, Gradients<T>* grads) const override;
  Shape output_shape(const Shape& in) const override { return in; }
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Tanh>(*this); }
};

/// Nearest-neighbour 2x upsampling.
template <typename T>
class Upsample2x final : public Layer<T> {
 public:
  Tensor<T> forward(const Tensor<T>& x, Tape<T>* tape) const override;
  Tensor<T> backward(const Tensor<T>& gy, Tape<T>& tape, Gradients<T>* grads) const override;
  Shape output_shape(const Shape& in) const override { return {in.n, in.h * 2, in.w * 2, in.c}; }
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Upsample2x>(*this); }
};

/// 2x2 max pooling, stride 2; ties go to the first position in scan order.
template <typename T>
class MaxPool2 final : public Layer<T> {
 public:
  Tensor<T> forward(const Tensor<T>& x, Tape<T>* tape) const override;
  Tensor<T> backward(const Tensor<T>& gy, Tape<T>& tape, Gradients<T>* grads) const override;
  Shape output_shape(const Shape& in) const override { return {in.n, in.h / 2, in.w / 2, in.c}; }
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<MaxPool2>(*this); }
};

/// Fully connected layer over the flattened h*w*c features; output (n,1,1,out).
template <typename T>
class Dense final : public Layer<T> {
 public:
  Dense(int in_features, int out_features, Rng& rng, double init_std);
  Tensor<T> forward(const Tensor<T>& x, Tape<T>* tape) const override;
  Tensor<T> backward(const Tensor<T>& gy, Tape<T>& tape, Gradients<T>* grads) const override;
  Shape output_shape(const Shape& in) const override { return {in.n, 1, 1, out_features_}; }
  void collect(const std::string& prefix, std::vector<NamedParam<T>>& out) override;
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Dense>(*this); }

 private:
  int in_features_;
  int out_features_;
  Tensor<T> weight_;  // in x out
  Tensor<T> bias_;
};

template <typename T>
class Sequential final : public Layer<T> {
 public:
  Sequential() = default;
  Sequential(const Sequential& other);
  Sequential& operator=(const Sequential& other);
  Sequential(Sequential&&) noexcept = default;
  Sequential& operator=(Sequential&&) noexcept = default;

  template <typename L, typename... Args>
  Sequential& add(Args&&... args) {
    layers_.push_back(std::make_unique<L>(std::forward<Args>(args)...));
    return *this;
  }
  Sequential& add_layer(std::unique_ptr<Layer<T>> layer) {
    layers_.push_back(std::move(layer));
    return *this;
  }

  Tensor<T> forward(const Tensor<T>& x, Tape<T>* tape) const override;
  Tensor<T> backward(const Tensor<T>& gy, Tape<T>& tape, Gradients<T>* grads) const override;
  Shape output_shape(const Shape& in) const override;
  void collect(const std::string& prefix, std::vector<NamedParam<T>>& out) override;
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Sequential>(*this); }

  std::size_t depth() const { return layers_.size(); }

 private:
  std::vector<std::unique_ptr<Layer<T>>> layers_;
};

/// y = x + body(x); body must preserve shape.
template <typename T>
class Residual final : public Layer<T> {
 public:
  explicit Residual(Sequential<T> body) : body_(std::move(body)) {}
  Tensor<T> forward(const Tensor<T>& x, Tape<T>* tape) const override;
  Tensor<T> backward(const Tensor<T>& gy, Tape<T>& tape, Gradients<T>* grads) const override;
  Shape output_shape(const Shape& in) const override { return in; }
  void collect(const std::string& prefix, std::vector<NamedParam<T>>& out) override {
    body_.collect(prefix, out);
  }
  std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Residual>(*this); }

 private:
  Sequential<T> body_;
};

/// C = A * B^T helper for callers holding B in row-major N x K form.
template <typename T>
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c, bool accumulate);

}  // namespace lcgan::nn
