#include "mbptrack/simd.hpp"

#if defined(__aarch64__)
#include <arm_neon.h>

#include <algorithm>

namespace mbp::simd::detail {
namespace {

void gemm_neon(std::size_t n, std::size_t k, std::size_t m, const double* a,
               const double* b, double* c) {
  for (std::size_t i = 0; i < n; ++i) {
    double* crow = c + i * m;
    std::size_t j = 0;
    for (; j + 4 <= m; j += 4) {
      float64x2_t acc0 = vdupq_n_f64(0.0), acc1 = vdupq_n_f64(0.0);
      for (std::size_t p = 0; p < k; ++p) {
        const float64x2_t av = vdupq_n_f64(a[i * k + p]);
        acc0 = vfmaq_f64(acc0, av, vld1q_f64(b + p * m + j));
        acc1 = vfmaq_f64(acc1, av, vld1q_f64(b + p * m + j + 2));
      }
      vst1q_f64(crow + j, vaddq_f64(vld1q_f64(crow + j), acc0));
      vst1q_f64(crow + j + 2, vaddq_f64(vld1q_f64(crow + j + 2), acc1));
    }
    for (; j < m; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += a[i * k + p] * b[p * m + j];
      crow[j] += acc;
    }
  }
}

double dot_neon(std::size_t n, const double* a, const double* b) {
  float64x2_t acc = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) acc = vfmaq_f64(acc, vld1q_f64(a + i), vld1q_f64(b + i));
  double s = vaddvq_f64(acc);
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy_neon(std::size_t n, double alpha, const double* x, double* y) {
  const float64x2_t av = vdupq_n_f64(alpha);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    vst1q_f64(y + i, vfmaq_f64(vld1q_f64(y + i), av, vld1q_f64(x + i)));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void vmax_neon(std::size_t n, const double* x, double* y) {
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    vst1q_f64(y + i, vmaxq_f64(vld1q_f64(y + i), vld1q_f64(x + i)));
  }
  for (; i < n; ++i) y[i] = std::max(y[i], x[i]);
}

}  // namespace

const KernelTable kNeonTable{Isa::kNeon, &gemm_neon, &dot_neon, &axpy_neon,
                             &vmax_neon};

}  // namespace mbp::simd::detail
#endif
