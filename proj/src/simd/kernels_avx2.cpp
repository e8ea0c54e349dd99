// AVX2 + FMA variants. This translation unit is compiled with -mavx2 -mfma and
// is only entered after the dispatcher has confirmed CPU support.

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#include <cmath>
#include <cstdint>

#include "lcgan/simd/kernels.hpp"

namespace lcgan::simd {
namespace {

template <typename T>
struct Vec;

template <>
struct Vec<float> {
  using reg = __m256;
  static constexpr std::size_t width = 8;
  static reg zero() { return _mm256_setzero_ps(); }
  static reg set1(float x) { return _mm256_set1_ps(x); }
  static reg load(const float* p) { return _mm256_loadu_ps(p); }
  static reg mask_load(const float* p, __m256i m) { return _mm256_maskload_ps(p, m); }
  static void store(float* p, reg x) { _mm256_storeu_ps(p, x); }
  static void mask_store(float* p, __m256i m, reg x) { _mm256_maskstore_ps(p, m, x); }
  static reg fmadd(reg a, reg b, reg c) { return _mm256_fmadd_ps(a, b, c); }
  static reg add(reg a, reg b) { return _mm256_add_ps(a, b); }
  static __m256i tail_mask(std::size_t count) {
    alignas(32) std::int32_t lanes[8];
    for (std::size_t i = 0; i < 8; ++i) lanes[i] = i < count ? -1 : 0;
    return _mm256_load_si256(reinterpret_cast<const __m256i*>(lanes));
  }
};

template <>
struct Vec<double> {
  using reg = __m256d;
  static constexpr std::size_t width = 4;
  static reg zero() { return _mm256_setzero_pd(); }
  static reg set1(double x) { return _mm256_set1_pd(x); }
  static reg load(const double* p) { return _mm256_loadu_pd(p); }
  static reg mask_load(const double* p, __m256i m) { return _mm256_maskload_pd(p, m); }
  static void store(double* p, reg x) { _mm256_storeu_pd(p, x); }
  static void mask_store(double* p, __m256i m, reg x) { _mm256_maskstore_pd(p, m, x); }
  static reg fmadd(reg a, reg b, reg c) { return _mm256_fmadd_pd(a, b, c); }
  static reg add(reg a, reg b) { return _mm256_add_pd(a, b); }
  static __m256i tail_mask(std::size_t count) {
    alignas(32) std::int64_t lanes[4];
    for (std::size_t i = 0; i < 4; ++i) lanes[i] = i < count ? -1 : 0;
    return _mm256_load_si256(reinterpret_cast<const __m256i*>(lanes));
  }
};

// R rows by V vectors of columns. When Masked, the last vector is partial.
// Each output element accumulates over k in strictly increasing order, so the
// result does not depend on how rows are grouped into blocks.
template <typename T, int R, int V, bool TransA, bool Masked>
inline void micro_kernel(const GemmArgs<T>& g, std::size_t i0, std::size_t j0, __m256i mask) {
  using V_ = Vec<T>;
  typename V_::reg acc[R][V];
  for (int r = 0; r < R; ++r)
    for (int v = 0; v < V; ++v) acc[r][v] = V_::zero();

  const T* a_base = TransA ? g.a + i0 : g.a + i0 * g.lda;
  for (std::size_t p = 0; p < g.k; ++p) {
    const T* brow = g.b + p * g.ldb + j0;
    typename V_::reg b[V];
    for (int v = 0; v < V; ++v) {
      if (Masked && v == V - 1)
        b[v] = V_::mask_load(brow + v * V_::width, mask);
      else
        b[v] = V_::load(brow + v * V_::width);
    }
    for (int r = 0; r < R; ++r) {
      const T av = TransA ? a_base[p * g.lda + r] : a_base[r * g.lda + p];
      const auto ab = V_::set1(av);
      for (int v = 0; v < V; ++v) acc[r][v] = V_::fmadd(ab, b[v], acc[r][v]);
    }
  }

  for (int r = 0; r < R; ++r) {
    T* crow = g.c + (i0 + r) * g.ldc + j0;
    for (int v = 0; v < V; ++v) {
      T* dst = crow + v * V_::width;
      if (Masked && v == V - 1) {
        auto out = acc[r][v];
        if (g.accumulate) out = V_::add(V_::mask_load(dst, mask), out);
        V_::mask_store(dst, mask, out);
      } else {
        auto out = acc[r][v];
        if (g.accumulate) out = V_::add(V_::load(dst), out);
        V_::store(dst, out);
      }
    }
  }
}

template <typename T, int R, int V, bool TransA, bool Masked>
void row_sweep(const GemmArgs<T>& g, std::size_t j0, __m256i mask) {
  std::size_t i = 0;
  for (; i + R <= g.m; i += R) micro_kernel<T, R, V, TransA, Masked>(g, i, j0, mask);
  // Remaining rows one at a time; per-element arithmetic is identical.
  for (; i < g.m; ++i) micro_kernel<T, 1, V, TransA, Masked>(g, i, j0, mask);
}

template <typename T, bool TransA>
void gemm_avx2_impl(const GemmArgs<T>& g) {
  constexpr std::size_t w = Vec<T>::width;
  const __m256i full = _mm256_set1_epi32(-1);
  std::size_t j = 0;
  for (; j + 2 * w <= g.n; j += 2 * w) row_sweep<T, 6, 2, TransA, false>(g, j, full);
  if (j + w <= g.n) {
    row_sweep<T, 8, 1, TransA, false>(g, j, full);
    j += w;
  }
  if (j < g.n) row_sweep<T, 8, 1, TransA, true>(g, j, Vec<T>::tail_mask(g.n - j));
}

template <typename T>
void gemm_avx2(const GemmArgs<T>& g) {
  if (g.m == 0 || g.n == 0) return;
  if (g.k == 0) {
    if (!g.accumulate)
      for (std::size_t i = 0; i < g.m; ++i)
        for (std::size_t j = 0; j < g.n; ++j) g.c[i * g.ldc + j] = T(0);
    return;
  }
  if (g.trans_a)
    gemm_avx2_impl<T, true>(g);
  else
    gemm_avx2_impl<T, false>(g);
}

inline float hsum(__m256 x) {
  __m128 s = _mm_add_ps(_mm256_castps256_ps128(x), _mm256_extractf128_ps(x, 1));
  s = _mm_add_ps(s, _mm_movehl_ps(s, s));
  s = _mm_add_ss(s, _mm_movehdup_ps(s));
  return _mm_cvtss_f32(s);
}

inline double hsum(__m256d x) {
  __m128d s = _mm_add_pd(_mm256_castpd256_pd128(x), _mm256_extractf128_pd(x, 1));
  s = _mm_add_sd(s, _mm_unpackhi_pd(s, s));
  return _mm_cvtsd_f64(s);
}

template <typename T>
T dot_avx2(const T* x, const T* y, std::size_t n) {
  using V_ = Vec<T>;
  constexpr std::size_t w = V_::width;
  auto a0 = V_::zero(), a1 = V_::zero();
  std::size_t i = 0;
  for (; i + 2 * w <= n; i += 2 * w) {
    a0 = V_::fmadd(V_::load(x + i), V_::load(y + i), a0);
    a1 = V_::fmadd(V_::load(x + i + w), V_::load(y + i + w), a1);
  }
  for (; i + w <= n; i += w) a0 = V_::fmadd(V_::load(x + i), V_::load(y + i), a0);
  T s = hsum(V_::add(a0, a1));
  for (; i < n; ++i) s += x[i] * y[i];
  return s;
}

template <typename T>
void axpy_avx2(T a, const T* x, T* y, std::size_t n) {
  using V_ = Vec<T>;
  constexpr std::size_t w = V_::width;
  const auto av = V_::set1(a);
  std::size_t i = 0;
  for (; i + w <= n; i += w) V_::store(y + i, V_::fmadd(av, V_::load(x + i), V_::load(y + i)));
  for (; i < n; ++i) y[i] += a * x[i];
}

double abs_diff_sum_avx2_f32(const float* x, const float* y, std::size_t n) {
  const __m256 sign = _mm256_set1_ps(-0.0f);
  __m256d acc0 = _mm256_setzero_pd(), acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    __m256 d = _mm256_andnot_ps(sign, _mm256_sub_ps(_mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i)));
    acc0 = _mm256_add_pd(acc0, _mm256_cvtps_pd(_mm256_castps256_ps128(d)));
    acc1 = _mm256_add_pd(acc1, _mm256_cvtps_pd(_mm256_extractf128_ps(d, 1)));
  }
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += static_cast<double>(std::fabs(x[i] - y[i]));
  return s;
}

double abs_diff_sum_avx2_f64(const double* x, const double* y, std::size_t n) {
  const __m256d sign = _mm256_set1_pd(-0.0);
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    acc = _mm256_add_pd(acc, _mm256_andnot_pd(sign, _mm256_sub_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i))));
  double s = hsum(acc);
  for (; i < n; ++i) s += std::fabs(x[i] - y[i]);
  return s;
}

void adam_avx2_f32(float* p, const float* g, float* m, float* v, std::size_t n, const AdamCoeffs& c) {
  const float b1 = static_cast<float>(c.beta1), b2 = static_cast<float>(c.beta2);
  const float step = static_cast<float>(c.lr / c.bias1);
  const float inv_sqrt_bias2 = static_cast<float>(1.0 / std::sqrt(c.bias2));
  const float eps = static_cast<float>(c.eps);
  const __m256 vb1 = _mm256_set1_ps(b1), vb1c = _mm256_set1_ps(1.0f - b1);
  const __m256 vb2 = _mm256_set1_ps(b2), vb2c = _mm256_set1_ps(1.0f - b2);
  const __m256 vstep = _mm256_set1_ps(step), vib2 = _mm256_set1_ps(inv_sqrt_bias2);
  const __m256 veps = _mm256_set1_ps(eps);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 gi = _mm256_loadu_ps(g + i);
    const __m256 mi = _mm256_add_ps(_mm256_mul_ps(vb1, _mm256_loadu_ps(m + i)), _mm256_mul_ps(vb1c, gi));
    const __m256 vi = _mm256_add_ps(_mm256_mul_ps(vb2, _mm256_loadu_ps(v + i)),
                                    _mm256_mul_ps(_mm256_mul_ps(vb2c, gi), gi));
    const __m256 denom = _mm256_add_ps(_mm256_mul_ps(_mm256_sqrt_ps(vi), vib2), veps);
    const __m256 upd = _mm256_div_ps(_mm256_mul_ps(vstep, mi), denom);
    _mm256_storeu_ps(m + i, mi);
    _mm256_storeu_ps(v + i, vi);
    _mm256_storeu_ps(p + i, _mm256_sub_ps(_mm256_loadu_ps(p + i), upd));
  }
  for (; i < n; ++i) {
    m[i] = b1 * m[i] + (1.0f - b1) * g[i];
    v[i] = b2 * v[i] + (1.0f - b2) * g[i] * g[i];
    p[i] -= step * m[i] / (std::sqrt(v[i]) * inv_sqrt_bias2 + eps);
  }
}

void adam_avx2_f64(double* p, const double* g, double* m, double* v, std::size_t n, const AdamCoeffs& c) {
  const double step = c.lr / c.bias1;
  const double inv_sqrt_bias2 = 1.0 / std::sqrt(c.bias2);
  const __m256d vb1 = _mm256_set1_pd(c.beta1), vb1c = _mm256_set1_pd(1.0 - c.beta1);
  const __m256d vb2 = _mm256_set1_pd(c.beta2), vb2c = _mm256_set1_pd(1.0 - c.beta2);
  const __m256d vstep = _mm256_set1_pd(step), vib2 = _mm256_set1_pd(inv_sqrt_bias2);
  const __m256d veps = _mm256_set1_pd(c.eps);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d gi = _mm256_loadu_pd(g + i);
    const __m256d mi = _mm256_add_pd(_mm256_mul_pd(vb1, _mm256_loadu_pd(m + i)), _mm256_mul_pd(vb1c, gi));
    const __m256d vi = _mm256_add_pd(_mm256_mul_pd(vb2, _mm256_loadu_pd(v + i)),
                                     _mm256_mul_pd(_mm256_mul_pd(vb2c, gi), gi));
    const __m256d denom = _mm256_add_pd(_mm256_mul_pd(_mm256_sqrt_pd(vi), vib2), veps);
    const __m256d upd = _mm256_div_pd(_mm256_mul_pd(vstep, mi), denom);
    _mm256_storeu_pd(m + i, mi);
    _mm256_storeu_pd(v + i, vi);
    _mm256_storeu_pd(p + i, _mm256_sub_pd(_mm256_loadu_pd(p + i), upd));
  }
  for (; i < n; ++i) {
    m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
    v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
    p[i] -= step * m[i] / (std::sqrt(v[i]) * inv_sqrt_bias2 + c.eps);
  }
}

}  // namespace

namespace detail {
const KernelTable& avx2_table() {
  static const KernelTable table{
      Isa::avx2,
      &gemm_avx2<float>,
      &gemm_avx2<double>,
      &dot_avx2<float>,
      &dot_avx2<double>,
      &axpy_avx2<float>,
      &axpy_avx2<double>,
      &abs_diff_sum_avx2_f32,
      &abs_diff_sum_avx2_f64,
      &adam_avx2_f32,
      &adam_avx2_f64,
  };
  return table;
}
}  // namespace detail

}  // namespace lcgan::simd

#endif
