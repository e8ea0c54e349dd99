#include <cmath>
#include <cstring>

#include "lcgan/simd/kernels.hpp"

namespace lcgan::simd {
namespace {

template <typename T>
void gemm_ref(const GemmArgs<T>& g) {
  for (std::size_t i = 0; i < g.m; ++i) {
    T* crow = g.c + i * g.ldc;
    if (!g.accumulate) std::memset(crow, 0, g.n * sizeof(T));
    for (std::size_t p = 0; p < g.k; ++p) {
      const T aip = g.trans_a ? g.a[p * g.lda + i] : g.a[i * g.lda + p];
      const T* brow = g.b + p * g.ldb;
      for (std::size_t j = 0; j < g.n; ++j) crow[j] += aip * brow[j];
    }
  }
}

template <typename T>
T dot_ref(const T* x, const T* y, std::size_t n) {
  T s = 0;
  for (std::size_t i = 0; i < n; ++i) s += x[i] * y[i];
  return s;
}

template <typename T>
void axpy_ref(T a, const T* x, T* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

template <typename T>
double abs_diff_sum_ref(const T* x, const T* y, std::size_t n) {
  double s = 0;
  for (std::size_t i = 0; i < n; ++i) s += static_cast<double>(std::fabs(x[i] - y[i]));
  return s;
}

template <typename T>
void adam_ref(T* p, const T* g, T* m, T* v, std::size_t n, const AdamCoeffs& c) {
  const T b1 = static_cast<T>(c.beta1);
  const T b2 = static_cast<T>(c.beta2);
  const T step = static_cast<T>(c.lr / c.bias1);
  const T inv_sqrt_bias2 = static_cast<T>(1.0 / std::sqrt(c.bias2));
  const T eps = static_cast<T>(c.eps);
  for (std::size_t i = 0; i < n; ++i) {
    m[i] = b1 * m[i] + (T(1) - b1) * g[i];
    v[i] = b2 * v[i] + (T(1) - b2) * g[i] * g[i];
    p[i] -= step * m[i] / (std::sqrt(v[i]) * inv_sqrt_bias2 + eps);
  }
}

}  // namespace

namespace detail {
const KernelTable& scalar_table() {
  static const KernelTable table{
      Isa::scalar,
      &gemm_ref<float>,
      &gemm_ref<double>,
      &dot_ref<float>,
      &dot_ref<double>,
      &axpy_ref<float>,
      &axpy_ref<double>,
      &abs_diff_sum_ref<float>,
      &abs_diff_sum_ref<double>,
      &adam_ref<float>,
      &adam_ref<double>,
  };
  return table;
}
}  // namespace detail

}  // namespace lcgan::simd
