#include "mbptrack/simd.hpp"

#include <algorithm>

namespace mbp::simd::detail {
namespace {

void gemm_scalar(std::size_t n, std::size_t k, std::size_t m, const double* a,
                 const double* b, double* c) {
  for (std::size_t i = 0; i < n; ++i) {
    double* crow = c + i * m;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[i * k + p];
      const double* brow = b + p * m;
      for (std::size_t j = 0; j < m; ++j) crow[j] += av * brow[j];
    }
  }
}

double dot_scalar(std::size_t n, const double* a, const double* b) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy_scalar(std::size_t n, double alpha, const double* x, double* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void vmax_scalar(std::size_t n, const double* x, double* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] = std::max(y[i], x[i]);
}

}  // namespace

const KernelTable kScalarTable{Isa::kScalar, &gemm_scalar, &dot_scalar,
                               &axpy_scalar, &vmax_scalar};

}  // namespace mbp::simd::detail
