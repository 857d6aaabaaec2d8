#include "mbptrack/simd.hpp"

#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

namespace mbp::simd {
namespace {

const KernelTable* detect() {
  if (const char* env = std::getenv("MBPTRACK_ISA")) {
    const std::string want(env);
    if (want == "scalar") return &table(Isa::kScalar);
    if (want == "avx2") return &table(Isa::kAvx2);
    if (want == "neon") return &table(Isa::kNeon);
    throw std::invalid_argument("MBPTRACK_ISA: unknown value '" + want + "'");
  }
  if (supported(Isa::kAvx2)) return &table(Isa::kAvx2);
  if (supported(Isa::kNeon)) return &table(Isa::kNeon);
  return &table(Isa::kScalar);
}

std::atomic<const KernelTable*>& current() {
  static std::atomic<const KernelTable*> ptr{detect()};
  return ptr;
}

}  // namespace

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::kScalar: return "scalar";
    case Isa::kAvx2: return "avx2";
    case Isa::kNeon: return "neon";
  }
  return "unknown";
}

bool supported(Isa isa) {
  switch (isa) {
    case Isa::kScalar:
      return true;
    case Isa::kAvx2:
#if defined(__x86_64__) || defined(_M_X64)
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
    case Isa::kNeon:
#if defined(__aarch64__)
      return true;
#else
      return false;
#endif
  }
  return false;
}

const KernelTable& table(Isa isa) {
  if (!supported(isa)) {
    throw std::invalid_argument(std::string("ISA not supported on this host: ") +
                                std::string(isa_name(isa)));
  }
  switch (isa) {
#if defined(__x86_64__) || defined(_M_X64)
    case Isa::kAvx2: return detail::kAvx2Table;
#endif
#if defined(__aarch64__)
    case Isa::kNeon: return detail::kNeonTable;
#endif
    default: return detail::kScalarTable;
  }
}

const KernelTable& active() { return *current().load(std::memory_order_acquire); }

void set_active(Isa isa) { current().store(&table(isa), std::memory_order_release); }

}  // namespace mbp::simd
