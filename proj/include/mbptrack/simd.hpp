#pragma once

// Dense float64 kernels used by the autodiff core. Every kernel has a scalar
// reference implementation plus vectorized variants; the variant is chosen
// once at startup from the host CPU (override with MBPTRACK_ISA=scalar|avx2|neon).

#include <cstddef>
#include <string_view>

namespace mbp::simd {

enum class Isa { kScalar, kAvx2, kNeon };

std::string_view isa_name(Isa isa);

struct KernelTable {
  Isa isa;
  // c[n x m] += a[n x k] * b[k x m], all row-major and densely packed.
  void (*gemm)(std::size_t n, std::size_t k, std::size_t m, const double* a,
               const double* b, double* c);
  double (*dot)(std::size_t n, const double* a, const double* b);
  // y += alpha * x
  void (*axpy)(std::size_t n, double alpha, const double* x, double* y);
  // y[i] = max(y[i], x[i])
  void (*vmax)(std::size_t n, const double* x, double* y);
};

bool supported(Isa isa);

// Throws std::invalid_argument when the ISA is not available on this host.
const KernelTable& table(Isa isa);

const KernelTable& active();

// Switches the process-wide kernel table. Not thread-safe with concurrent
// kernel calls; intended for tests and startup configuration.
void set_active(Isa isa);

namespace detail {
extern const KernelTable kScalarTable;
#if defined(__x86_64__) || defined(_M_X64)
extern const KernelTable kAvx2Table;
#endif
#if defined(__aarch64__)
extern const KernelTable kNeonTable;
#endif
}  // namespace detail

}  // namespace mbp::simd
