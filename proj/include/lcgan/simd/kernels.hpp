#pragma once

// Data-parallel inner loops used by the network layers and the optimizer.
//
// Every kernel has a portable scalar reference implementation and, on x86-64,
// an AVX2+FMA variant. The variant is selected once at startup from CPUID;
// setting LCGAN_SIMD=scalar in the environment forces the reference path.
// Both tables are always reachable through kernels_for() so tests can compare
// them on identical inputs.

#include <cstddef>
#include <string_view>

namespace lcgan::simd {

enum class Isa { scalar, avx2 };

std::string_view isa_name(Isa isa);

/// Row-major GEMM: C[M x N] = (accumulate ? C : 0) + op(A) * B.
/// op(A) is A (M x K, leading dim lda) or, when trans_a is set, the
/// transpose of a K x M matrix with leading dim lda. B is K x N.
template <typename T>
struct GemmArgs {
  std::size_t m = 0;
  std::size_t n = 0;
  std::size_t k = 0;
  const T* a = nullptr;
  std::size_t lda = 0;
  bool trans_a = false;
  const T* b = nullptr;
  std::size_t ldb = 0;
  T* c = nullptr;
  std::size_t ldc = 0;
  bool accumulate = false;
};

/// Per-step constants for the bias-corrected adaptive-moment update.
struct AdamCoeffs {
  double lr = 0.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double bias1 = 1.0;  // 1 - beta1^t
  double bias2 = 1.0;  // 1 - beta2^t
};

struct KernelTable {
  Isa isa;
  void (*gemm_f32)(const GemmArgs<float>&);
  void (*gemm_f64)(const GemmArgs<double>&);
  float (*dot_f32)(const float* x, const float* y, std::size_t n);
  double (*dot_f64)(const double* x, const double* y, std::size_t n);
  // y += a * x
  void (*axpy_f32)(float a, const float* x, float* y, std::size_t n);
  void (*axpy_f64)(double a, const double* x, double* y, std::size_t n);
  // sum |x - y|, accumulated in double
  double (*abs_diff_sum_f32)(const float* x, const float* y, std::size_t n);
  double (*abs_diff_sum_f64)(const double* x, const double* y, std::size_t n);
  void (*adam_f32)(float* param, const float* grad, float* m, float* v, std::size_t n,
                   const AdamCoeffs& c);
  void (*adam_f64)(double* param, const double* grad, double* m, double* v, std::size_t n,
                   const AdamCoeffs& c);
};

bool isa_supported(Isa isa);
const KernelTable& kernels_for(Isa isa);
/// The table chosen at startup.
const KernelTable& kernels();

namespace detail {
const KernelTable& scalar_table();
#if defined(__x86_64__) || defined(_M_X64)
const KernelTable& avx2_table();
#endif
}  // namespace detail

// Typed front-ends so templated layer code can stay precision-agnostic.
inline void gemm(const GemmArgs<float>& a) { kernels().gemm_f32(a); }
inline void gemm(const GemmArgs<double>& a) { kernels().gemm_f64(a); }
inline float dot(const float* x, const float* y, std::size_t n) { return kernels().dot_f32(x, y, n); }
inline double dot(const double* x, const double* y, std::size_t n) { return kernels().dot_f64(x, y, n); }
inline void axpy(float a, const float* x, float* y, std::size_t n) { kernels().axpy_f32(a, x, y, n); }
inline void axpy(double a, const double* x, double* y, std::size_t n) { kernels().axpy_f64(a, x, y, n); }
inline double abs_diff_sum(const float* x, const float* y, std::size_t n) {
  return kernels().abs_diff_sum_f32(x, y, n);
}
inline double abs_diff_sum(const double* x, const double* y, std::size_t n) {
  return kernels().abs_diff_sum_f64(x, y, n);
}
inline void adam_update(float* p, const float* g, float* m, float* v, std::size_t n, const AdamCoeffs& c) {
  kernels().adam_f32(p, g, m, v, n, c);
}
inline void adam_update(double* p, const double* g, double* m, double* v, std::size_t n,
                        const AdamCoeffs& c) {
  kernels().adam_f64(p, g, m, v, n, c);
}

}  // namespace lcgan::simd
