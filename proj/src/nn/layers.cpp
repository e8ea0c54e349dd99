#include "lcgan/nn/layers.hpp"

#include <cmath>
#include <cstring>

#include "lcgan/simd/kernels.hpp"

namespace lcgan::nn {
namespace {

template <typename T>
Tensor<T> gaussian(Shape s, Rng& rng, double stddev) {
  Tensor<T> t(s);
  for (auto& v : t.values()) v = static_cast<T>(rng.normal(0.0, stddev));
  return t;
}

// Per-thread scratch buffers reused across conv calls; they only grow.
template <typename T>
T* scratch(int slot, std::size_t n) {
  thread_local std::vector<T> buffers[2];
  auto& b = buffers[slot];
  if (b.size() < n) b.resize(n);
  return b.data();
}

// Rows are output pixels (n, oy, ox); each row holds the k*k*C receptive field.
template <typename T>
void im2col(const Tensor<T>& x, const ConvSpec& s, int ho, int wo, T* cols) {
  const Shape& in = x.shape();
  T* dst = cols;
  const std::size_t chan_bytes = static_cast<std::size_t>(in.c) * sizeof(T);
  for (int n = 0; n < in.n; ++n)
    for (int oy = 0; oy < ho; ++oy)
      for (int ox = 0; ox < wo; ++ox)
        for (int ky = 0; ky < s.kernel; ++ky) {
          const int iy = oy * s.stride - s.pad + ky;
          if (iy < 0 || iy >= in.h) {
            std::memset(dst, 0, chan_bytes * s.kernel);
            dst += static_cast<std::size_t>(in.c) * s.kernel;
            continue;
          }
          const int ix0 = ox * s.stride - s.pad;
          if (ix0 >= 0 && ix0 + s.kernel <= in.w) {
            // whole kernel row is inside: one contiguous copy
            std::memcpy(dst, x.data() + x.offset(n, iy, ix0, 0), chan_bytes * s.kernel);
            dst += static_cast<std::size_t>(in.c) * s.kernel;
            continue;
          }
          for (int kx = 0; kx < s.kernel; ++kx, dst += in.c) {
            const int ix = ix0 + kx;
            if (ix < 0 || ix >= in.w)
              std::memset(dst, 0, chan_bytes);
            else
              std::memcpy(dst, x.data() + x.offset(n, iy, ix, 0), chan_bytes);
          }
        }
}

template <typename T>
void col2im(const T* cols, const ConvSpec& s, int ho, int wo, Tensor<T>& gx) {
  const Shape& in = gx.shape();
  const T* src = cols;
  for (int n = 0; n < in.n; ++n)
    for (int oy = 0; oy < ho; ++oy)
      for (int ox = 0; ox < wo; ++ox)
        for (int ky = 0; ky < s.kernel; ++ky) {
          const int iy = oy * s.stride - s.pad + ky;
          for (int kx = 0; kx < s.kernel; ++kx, src += in.c) {
            const int ix = ox * s.stride - s.pad + kx;
            if (iy < 0 || iy >= in.h || ix < 0 || ix >= in.w) continue;
            T* dst = gx.data() + gx.offset(n, iy, ix, 0);
            for (int c = 0; c < in.c; ++c) dst[c] += src[c];
          }
        }
}

template <typename T>
void add_row_bias(T* y, std::size_t rows, const Tensor<T>& bias) {
  const std::size_t cols = bias.size();
  for (std::size_t r = 0; r < rows; ++r, y += cols)
    for (std::size_t c = 0; c < cols; ++c) y[c] += bias[c];
}

template <typename T>
void accumulate_column_sums(const T* g, std::size_t rows, Tensor<T>& out) {
  const std::size_t cols = out.size();
  for (std::size_t r = 0; r < rows; ++r, g += cols)
    for (std::size_t c = 0; c < cols; ++c) out[c] += g[c];
}

}  // namespace

template <typename T>
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c, bool accumulate) {
  std::vector<T> bt(k * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < k; ++j) bt[j * n + i] = b[i * k + j];
  simd::gemm(simd::GemmArgs<T>{m, n, k, a, k, false, bt.data(), n, c, n, accumulate});
}

// ---------------------------------------------------------------- Conv2d

template <typename T>
Conv2d<T>::Conv2d(ConvSpec spec, Rng& rng, double init_std)
    : spec_(spec),
      weight_(gaussian<T>({spec.kernel, spec.kernel, spec.in_channels, spec.out_channels}, rng, init_std)),
      bias_(Shape{1, 1, 1, spec.out_channels}) {
  if (spec.in_channels <= 0 || spec.out_channels <= 0 || spec.kernel <= 0 || spec.stride <= 0 || spec.pad < 0)
    throw InvalidArgument("Conv2d: invalid spec");
}

template <typename T>
Shape Conv2d<T>::output_shape(const Shape& in) const {
  return {in.n, spec_.out_extent(in.h), spec_.out_extent(in.w), spec_.out_channels};
}

template <typename T>
Tensor<T> Conv2d<T>::forward(const Tensor<T>& x, Tape<T>* tape) const {
  if (x.shape().c != spec_.in_channels)
    throw ShapeError("Conv2d: expected " + std::to_string(spec_.in_channels) + " input channels, got " +
                     x.shape().str());
  const Shape out = output_shape(x.shape());
  if (out.h <= 0 || out.w <= 0) throw ShapeError("Conv2d: input " + x.shape().str() + " too small");
  const std::size_t rows = static_cast<std::size_t>(out.n) * out.h * out.w;
  const std::size_t kdim = static_cast<std::size_t>(spec_.kernel) * spec_.kernel * spec_.in_channels;
  T* cols = scratch<T>(0, rows * kdim);
  im2col(x, spec_, out.h, out.w, cols);
  Tensor<T> y(out);
  add_row_bias(y.data(), rows, bias_);
  simd::gemm(simd::GemmArgs<T>{rows, static_cast<std::size_t>(spec_.out_channels), kdim, cols, kdim, false,
                               weight_.data(), static_cast<std::size_t>(spec_.out_channels), y.data(),
                               static_cast<std::size_t>(spec_.out_channels), true});
  if (tape) tape->push(x);
  return y;
}

template <typename T>
Tensor<T> Conv2d<T>::backward(const Tensor<T>& gy, Tape<T>& tape, Gradients<T>* grads) const {
  const Tensor<T> x = tape.pop();
  const Shape out = output_shape(x.shape());
  require_same_shape(gy.shape(), out, "Conv2d::backward");
  const std::size_t rows = static_cast<std::size_t>(out.n) * out.h * out.w;
  const std::size_t kdim = static_cast<std::size_t>(spec_.kernel) * spec_.kernel * spec_.in_channels;
  const auto cout = static_cast<std::size_t>(spec_.out_channels);
  if (grads) {
    T* cols = scratch<T>(0, rows * kdim);
    im2col(x, spec_, out.h, out.w, cols);
    Tensor<T>& dw = grads->slot(weight_);
    simd::gemm(simd::GemmArgs<T>{kdim, cout, rows, cols, kdim, true, gy.data(), cout, dw.data(), cout, true});
    accumulate_column_sums(gy.data(), rows, grads->slot(bias_));
  }
  T* dcols = scratch<T>(1, rows * kdim);
  gemm_nt(rows, kdim, cout, gy.data(), weight_.data(), dcols, false);
  Tensor<T> gx(x.shape());
  col2im(dcols, spec_, out.h, out.w, gx);
  return gx;
}

template <typename T>
void Conv2d<T>::collect(const std::string& prefix, std::vector<NamedParam<T>>& out) {
  out.push_back({prefix + "weight", &weight_});
  out.push_back({prefix + "bias", &bias_});
}

// ---------------------------------------------------------- InstanceNorm

template <typename T>
Tensor<T> InstanceNorm<T>::forward(const Tensor<T>& x, Tape<T>* tape) const {
  const Shape& s = x.shape();
  const std::size_t positions = static_cast<std::size_t>(s.h) * s.w;
  Tensor<T> y(s);
  std::vector<double> mean(s.c), sq(s.c);
  for (int n = 0; n < s.n; ++n) {
    const T* xi = x.item(n);
    T* yi = y.item(n);
    std::fill(mean.begin(), mean.end(), 0.0);
    std::fill(sq.begin(), sq.end(), 0.0);
    for (std::size_t p = 0; p < positions; ++p)
      for (int c = 0; c < s.c; ++c) mean[c] += xi[p * s.c + c];
    for (int c = 0; c < s.c; ++c) mean[c] /= static_cast<double>(positions);
    for (std::size_t p = 0; p < positions; ++p)
      for (int c = 0; c < s.c; ++c) {
        const double d = xi[p * s.c + c] - mean[c];
        sq[c] += d * d;
      }
    for (int c = 0; c < s.c; ++c) sq[c] = 1.0 / std::sqrt(sq[c] / static_cast<double>(positions) + eps_);
    for (std::size_t p = 0; p < positions; ++p)
      for (int c = 0; c < s.c; ++c) yi[p * s.c + c] = static_cast<T>((xi[p * s.c + c] - mean[c]) * sq[c]);
  }
  if (tape) tape->push(x);
  return y;
}

template <typename T>
Tensor<T> InstanceNorm<T>::backward(const Tensor<T>& gy, Tape<T>& tape, Gradients<T>*) const {
  const Tensor<T> x = tape.pop();
  const Shape& s = x.shape();
  require_same_shape(gy.shape(), s, "InstanceNorm::backward");
  const std::size_t positions = static_cast<std::size_t>(s.h) * s.w;
  const double inv_p = 1.0 / static_cast<double>(positions);
  Tensor<T> gx(s);
  std::vector<double> mean(s.c), istd(s.c), gmean(s.c), gxhat(s.c);
  for (int n = 0; n < s.n; ++n) {
    const T* xi = x.item(n);
    const T* gi = gy.item(n);
    T* oi = gx.item(n);
    std::fill(mean.begin(), mean.end(), 0.0);
    std::fill(istd.begin(), istd.end(), 0.0);
    std::fill(gmean.begin(), gmean.end(), 0.0);
    std::fill(gxhat.begin(), gxhat.end(), 0.0);
    for (std::size_t p = 0; p < positions; ++p)
      for (int c = 0; c < s.c; ++c) mean[c] += xi[p * s.c + c];
    for (int c = 0; c < s.c; ++c) mean[c] *= inv_p;
    for (std::size_t p = 0; p < positions; ++p)
      for (int c = 0; c < s.c; ++c) {
        const double d = xi[p * s.c + c] - mean[c];
        istd[c] += d * d;
      }
    for (int c = 0; c < s.c; ++c) istd[c] = 1.0 / std::sqrt(istd[c] * inv_p + eps_);
    for (std::size_t p = 0; p < positions; ++p)
      for (int c = 0; c < s.c; ++c) {
        const double g = gi[p * s.c + c];
        gmean[c] += g;
        gxhat[c] += g * (xi[p * s.c + c] - mean[c]) * istd[c];
      }
    for (int c = 0; c < s.c; ++c) {
      gmean[c] *= inv_p;
      gxhat[c] *= inv_p;
    }
    for (std::size_t p = 0; p < positions; ++p)
      for (int c = 0; c < s.c; ++c) {
        const double xhat = (xi[p * s.c + c] - mean[c]) * istd[c];
        oi[p * s.c + c] = static_cast<T>(istd[c] * (gi[p * s.c + c] - gmean[c] - xhat * gxhat[c]));
      }
  }
  return gx;
}

// ------------------------------------------------------------ activations

template <typename T>
Tensor<T> LeakyRelu<T>::forward(const Tensor<T>& x, Tape<T>* tape) const {
  Tensor<T> y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > T(0) ? x[i] : slope_ * x[i];
  if (tape) tape->push(x);
  return y;
}

template <typename T>
Tensor<T> LeakyRelu<T>::backward(const Tensor<T>& gy, Tape<T>& tape, Gradients<T>*) const {
  const Tensor<T> x = tape.pop();
  require_same_shape(gy.shape(), x.shape(), "LeakyRelu::backward");
  Tensor<T> gx(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) gx[i] = x[i] > T(0) ? gy[i] : slope_ * gy[i];
  return gx;
}

template <typename T>
Tensor<T> Tanh<T>::forward(const Tensor<T>& x, Tape<T>* tape) const {
  Tensor<T> y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = std::tanh(x[i]);
  if (tape) tape->push(y);
  return y;
}

template <typename T>
Tensor<T> Tanh<T>::backward(const Tensor<T>& gy, Tape<T>& tape, Gradients<T>*) const {
  const Tensor<T> y = tape.pop();
  require_same_shape(gy.shape(), y.shape(), "Tanh::backward");
  Tensor<T> gx(y.shape());
  for (std::size_t i = 0; i < y.size(); ++i) gx[i] = gy[i] * (T(1) - y[i] * y[i]);
  return gx;
}

// ------------------------------------------------------------- resampling

template <typename T>
Tensor<T> Upsample2x<T>::forward(const Tensor<T>& x, Tape<T>* tape) const {
  const Shape& s = x.shape();
  Tensor<T> y(output_shape(s));
  const std::size_t chan_bytes = static_cast<std::size_t>(s.c) * sizeof(T);
  for (int n = 0; n < s.n; ++n)
    for (int oy = 0; oy < 2 * s.h; ++oy)
      for (int ox = 0; ox < 2 * s.w; ++ox)
        std::memcpy(&y.at(n, oy, ox, 0), &x.at(n, oy / 2, ox / 2, 0), chan_bytes);
  (void)tape;
  return y;
}

template <typename T>
Tensor<T> Upsample2x<T>::backward(const Tensor<T>& gy, Tape<T>&, Gradients<T>*) const {
  const Shape& g = gy.shape();
  Tensor<T> gx(Shape{g.n, g.h / 2, g.w / 2, g.c});
  for (int n = 0; n < g.n; ++n)
    for (int oy = 0; oy < g.h; ++oy)
      for (int ox = 0; ox < g.w; ++ox) {
        const T* src = &gy.at(n, oy, ox, 0);
        T* dst = &gx.at(n, oy / 2, ox / 2, 0);
        for (int c = 0; c < g.c; ++c) dst[c] += src[c];
      }
  return gx;
}

template <typename T>
Tensor<T> MaxPool2<T>::forward(const Tensor<T>& x, Tape<T>* tape) const {
  const Shape& s = x.shape();
  Tensor<T> y(output_shape(s));
  for (int n = 0; n < s.n; ++n)
    for (int oy = 0; oy < s.h / 2; ++oy)
      for (int ox = 0; ox < s.w / 2; ++ox)
        for (int c = 0; c < s.c; ++c) {
          T best = x.at(n, 2 * oy, 2 * ox, c);
          for (int d = 1; d < 4; ++d) best = std::max(best, x.at(n, 2 * oy + d / 2, 2 * ox + d % 2, c));
          y.at(n, oy, ox, c) = best;
        }
  if (tape) tape->push(x);
  return y;
}

template <typename T>
Tensor<T> MaxPool2<T>::backward(const Tensor<T>& gy, Tape<T>& tape, Gradients<T>*) const {
  const Tensor<T> x = tape.pop();
  const Shape& s = x.shape();
  require_same_shape(gy.shape(), output_shape(s), "MaxPool2::backward");
  Tensor<T> gx(s);
  for (int n = 0; n < s.n; ++n)
    for (int oy = 0; oy < s.h / 2; ++oy)
      for (int ox = 0; ox < s.w / 2; ++ox)
        for (int c = 0; c < s.c; ++c) {
          int arg = 0;
          T best = x.at(n, 2 * oy, 2 * ox, c);
          for (int d = 1; d < 4; ++d) {
            const T v = x.at(n, 2 * oy + d / 2, 2 * ox + d % 2, c);
            if (v > best) {
              best = v;
              arg = d;
            }
          }
          gx.at(n, 2 * oy + arg / 2, 2 * ox + arg % 2, c) += gy.at(n, oy, ox, c);
        }
  return gx;
}

// ------------------------------------------------------------------ Dense

template <typename T>
Dense<T>::Dense(int in_features, int out_features, Rng& rng, double init_std)
    : in_features_(in_features),
      out_features_(out_features),
      weight_(gaussian<T>({1, 1, in_features, out_features}, rng, init_std)),
      bias_(Shape{1, 1, 1, out_features}) {
  if (in_features <= 0 || out_features <= 0) throw InvalidArgument("Dense: invalid feature counts");
}

template <typename T>
Tensor<T> Dense<T>::forward(const Tensor<T>& x, Tape<T>* tape) const {
  if (x.shape().item_size() != static_cast<std::size_t>(in_features_))
    throw ShapeError("Dense: expected " + std::to_string(in_features_) + " features, got " + x.shape().str());
  const auto batch = static_cast<std::size_t>(x.shape().n);
  Tensor<T> y(Shape{x.shape().n, 1, 1, out_features_});
  add_row_bias(y.data(), batch, bias_);
  const auto fin = static_cast<std::size_t>(in_features_);
  const auto fout = static_cast<std::size_t>(out_features_);
  simd::gemm(simd::GemmArgs<T>{batch, fout, fin, x.data(), fin, false, weight_.data(), fout, y.data(), fout, true});
  if (tape) tape->push(x);
  return y;
}

template <typename T>
Tensor<T> Dense<T>::backward(const Tensor<T>& gy, Tape<T>& tape, Gradients<T>* grads) const {
  const Tensor<T> x = tape.pop();
  const auto batch = static_cast<std::size_t>(x.shape().n);
  const auto fin = static_cast<std::size_t>(in_features_);
  const auto fout = static_cast<std::size_t>(out_features_);
  if (gy.size() != batch * fout) throw ShapeError("Dense::backward: gradient shape mismatch");
  if (grads) {
    Tensor<T>& dw = grads->slot(weight_);
    simd::gemm(simd::GemmArgs<T>{fin, fout, batch, x.data(), fin, true, gy.data(), fout, dw.data(), fout, true});
    accumulate_column_sums(gy.data(), batch, grads->slot(bias_));
  }
  Tensor<T> gx(x.shape());
  gemm_nt(batch, fin, fout, gy.data(), weight_.data(), gx.data(), false);
  return gx;
}

template <typename T>
void Dense<T>::collect(const std::string& prefix, std::vector<NamedParam<T>>& out) {
  out.push_back({prefix + "weight", &weight_});
  out.push_back({prefix + "bias", &bias_});
}

// ------------------------------------------------------------- containers

template <typename T>
Sequential<T>::Sequential(const Sequential& other) {
  layers_.reserve(other.layers_.size());
  for (const auto& l : other.layers_) layers_.push_back(l->clone());
}

template <typename T>
Sequential<T>& Sequential<T>::operator=(const Sequential& other) {
  if (this != &other) {
    Sequential copy(other);
    layers_ = std::move(copy.layers_);
  }
  return *this;
}

template <typename T>
Tensor<T> Sequential<T>::forward(const Tensor<T>& x, Tape<T>* tape) const {
  if (layers_.empty()) return x;
  Tensor<T> h = layers_.front()->forward(x, tape);
  for (std::size_t i = 1; i < layers_.size(); ++i) h = layers_[i]->forward(h, tape);
  return h;
}

template <typename T>
Tensor<T> Sequential<T>::backward(const Tensor<T>& gy, Tape<T>& tape, Gradients<T>* grads) const {
  if (layers_.empty()) return gy;
  Tensor<T> g = layers_.back()->backward(gy, tape, grads);
  for (std::size_t i = layers_.size() - 1; i-- > 0;) g = layers_[i]->backward(g, tape, grads);
  return g;
}

template <typename T>
Shape Sequential<T>::output_shape(const Shape& in) const {
  Shape s = in;
  for (const auto& l : layers_) s = l->output_shape(s);
  return s;
}

template <typename T>
void Sequential<T>::collect(const std::string& prefix, std::vector<NamedParam<T>>& out) {
  for (std::size_t i = 0; i < layers_.size(); ++i) layers_[i]->collect(prefix + std::to_string(i) + ".", out);
}

template <typename T>
Tensor<T> Residual<T>::forward(const Tensor<T>& x, Tape<T>* tape) const {
  Tensor<T> y = body_.forward(x, tape);
  require_same_shape(y.shape(), x.shape(), "Residual body");
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += x[i];
  return y;
}

template <typename T>
Tensor<T> Residual<T>::backward(const Tensor<T>& gy, Tape<T>& tape, Gradients<T>* grads) const {
  Tensor<T> gx = body_.backward(gy, tape, grads);
  for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gy[i];
  return gx;
}

#define LCGAN_INSTANTIATE(T)                                                                  \
  template void gemm_nt<T>(std::size_t, std::size_t, std::size_t, const T*, const T*, T*, bool); \
  template class Conv2d<T>;                                                                   \
  template class InstanceNorm<T>;                                                             \
  template class LeakyRelu<T>;                                                                \
  template class Tanh<T>;                                                                     \
  template class Upsample2x<T>;                                                               \
  template class MaxPool2<T>;                                                                 \
  template class Dense<T>;                                                                    \
  template class Sequential<T>;                                                               \
  template class Residual<T>;

LCGAN_INSTANTIATE(float)
LCGAN_INSTANTIATE(double)

#undef LCGAN_INSTANTIATE

}  // namespace lcgan::nn
