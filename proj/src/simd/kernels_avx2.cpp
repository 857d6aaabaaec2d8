// Compiled with -mavx2 -mfma; only reached after a runtime CPU check.
#include "mbptrack/simd.hpp"

#if defined(__x86_64__) || defined(_M_X64)
#include <immintrin.h>

#include <algorithm>

namespace mbp::simd::detail {
namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d sh = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}

// 4x8 register block: eight accumulators, two B loads and four broadcasts
// per k step.
inline void block_4x8(std::size_t k, std::size_t m, const double* a,
                      std::size_t lda, const double* b, double* c) {
  __m256d c00 = _mm256_setzero_pd(), c01 = _mm256_setzero_pd();
  __m256d c10 = _mm256_setzero_pd(), c11 = _mm256_setzero_pd();
  __m256d c20 = _mm256_setzero_pd(), c21 = _mm256_setzero_pd();
  __m256d c30 = _mm256_setzero_pd(), c31 = _mm256_setzero_pd();
  for (std::size_t p = 0; p < k; ++p) {
    const __m256d b0 = _mm256_loadu_pd(b + p * m);
    const __m256d b1 = _mm256_loadu_pd(b + p * m + 4);
    __m256d av = _mm256_broadcast_sd(a + p);
    c00 = _mm256_fmadd_pd(av, b0, c00);
    c01 = _mm256_fmadd_pd(av, b1, c01);
    av = _mm256_broadcast_sd(a + lda + p);
    c10 = _mm256_fmadd_pd(av, b0, c10);
    c11 = _mm256_fmadd_pd(av, b1, c11);
    av = _mm256_broadcast_sd(a + 2 * lda + p);
    c20 = _mm256_fmadd_pd(av, b0, c20);
    c21 = _mm256_fmadd_pd(av, b1, c21);
    av = _mm256_broadcast_sd(a + 3 * lda + p);
    c30 = _mm256_fmadd_pd(av, b0, c30);
    c31 = _mm256_fmadd_pd(av, b1, c31);
  }
  auto store = [&](double* dst, __m256d lo, __m256d hi) {
    _mm256_storeu_pd(dst, _mm256_add_pd(_mm256_loadu_pd(dst), lo));
    _mm256_storeu_pd(dst + 4, _mm256_add_pd(_mm256_loadu_pd(dst + 4), hi));
  };
  store(c, c00, c01);
  store(c + m, c10, c11);
  store(c + 2 * m, c20, c21);
  store(c + 3 * m, c30, c31);
}

inline void block_1x4(std::size_t k, std::size_t m, const double* a,
                      const double* b, double* c) {
  __m256d acc = _mm256_setzero_pd();
  for (std::size_t p = 0; p < k; ++p) {
    acc = _mm256_fmadd_pd(_mm256_broadcast_sd(a + p),
                          _mm256_loadu_pd(b + p * m), acc);
  }
  _mm256_storeu_pd(c, _mm256_add_pd(_mm256_loadu_pd(c), acc));
}

inline void block_1x1(std::size_t k, std::size_t m, const double* a,
                      const double* b, double* c) {
  double acc = 0.0;
  for (std::size_t p = 0; p < k; ++p) acc += a[p] * b[p * m];
  *c += acc;
}

void gemm_avx2(std::size_t n, std::size_t k, std::size_t m, const double* a,
               const double* b, double* c) {
  const std::size_t m8 = m - m % 8;
  const std::size_t n4 = n - n % 4;
  for (std::size_t i = 0; i < n4; i += 4) {
    for (std::size_t j = 0; j < m8; j += 8) {
      block_4x8(k, m, a + i * k, k, b + j, c + i * m + j);
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t jstart = i < n4 ? m8 : 0;
    std::size_t j = jstart;
    for (; j + 4 <= m; j += 4) block_1x4(k, m, a + i * k, b + j, c + i * m + j);
    for (; j < m; ++j) block_1x1(k, m, a + i * k, b + j, c + i * m + j);
  }
}

double dot_avx2(std::size_t n, const double* a, const double* b) {
  __m256d acc0 = _mm256_setzero_pd(), acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4),
                           _mm256_loadu_pd(b + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  }
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy_avx2(std::size_t n, double alpha, const double* x, double* y) {
  const __m256d av = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i),
                                            _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void vmax_avx2(std::size_t n, const double* x, double* y) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_max_pd(_mm256_loadu_pd(y + i),
                                          _mm256_loadu_pd(x + i)));
  }
  for (; i < n; ++i) y[i] = std::max(y[i], x[i]);
}

}  // namespace

const KernelTable kAvx2Table{Isa::kAvx2, &gemm_avx2, &dot_avx2, &axpy_avx2,
                             &vmax_avx2};

}  // namespace mbp::simd::detail
#endif
