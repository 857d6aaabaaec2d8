#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "mbptrack/simd.hpp"

using namespace mbp::simd;

namespace {

std::vector<double> rand_vec(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

std::vector<Isa> vector_isas() {
  std::vector<Isa> out;
  for (Isa i : {Isa::kAvx2, Isa::kNeon})
    if (supported(i)) out.push_back(i);
  return out;
}

}  // namespace

TEST(Simd, ScalarAlwaysSupported) {
  EXPECT_TRUE(supported(Isa::kScalar));
  EXPECT_EQ(table(Isa::kScalar).isa, Isa::kScalar);
}

TEST(Simd, UnsupportedIsaThrows) {
  for (Isa i : {Isa::kAvx2, Isa::kNeon})
    if (!supported(i)) {
      EXPECT_THROW(table(i), std::invalid_argument);
    }
}

TEST(Simd, SetActiveRoundTrip) {
  const Isa before = active().isa;
  set_active(Isa::kScalar);
  EXPECT_EQ(active().isa, Isa::kScalar);
  set_active(before);
  EXPECT_EQ(active().isa, before);
}

TEST(Simd, GemmMatchesScalarOnAwkwardShapes) {
  std::mt19937_64 rng(1);
  const auto& ref = table(Isa::kScalar);
  for (Isa isa : vector_isas()) {
    const auto& vec = table(isa);
    for (std::size_t n : {1u, 3u, 4u, 5u, 9u, 17u})
      for (std::size_t k : {1u, 2u, 7u, 16u, 33u})
        for (std::size_t m : {1u, 3u, 4u, 8u, 11u, 24u}) {
          const auto a = rand_vec(n * k, rng);
          const auto b = rand_vec(k * m, rng);
          auto c0 = rand_vec(n * m, rng);
          auto c1 = c0;
          ref.gemm(n, k, m, a.data(), b.data(), c0.data());
          vec.gemm(n, k, m, a.data(), b.data(), c1.data());
          for (std::size_t i = 0; i < c0.size(); ++i)
            ASSERT_NEAR(c0[i], c1[i], 1e-12) << isa_name(isa) << " n=" << n << " k=" << k
                                             << " m=" << m;
        }
  }
}

TEST(Simd, VectorKernelsMatchScalar) {
  std::mt19937_64 rng(2);
  const auto& ref = table(Isa::kScalar);
  for (Isa isa : vector_isas()) {
    const auto& vec = table(isa);
    for (std::size_t n : {0u, 1u, 3u, 4u, 7u, 8u, 13u, 64u, 101u}) {
      const auto x = rand_vec(n, rng);
      const auto y = rand_vec(n, rng);
      EXPECT_NEAR(ref.dot(n, x.data(), y.data()), vec.dot(n, x.data(), y.data()), 1e-12);
      auto y0 = y, y1 = y;
      ref.axpy(n, 0.37, x.data(), y0.data());
      vec.axpy(n, 0.37, x.data(), y1.data());
      for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(y0[i], y1[i], 1e-15);
      y0 = y;
      y1 = y;
      ref.vmax(n, x.data(), y0.data());
      vec.vmax(n, x.data(), y1.data());
      EXPECT_EQ(y0, y1);
    }
  }
}

TEST(Simd, GemmAccumulatesIntoOutput) {
  const double a[] = {1, 2, 3, 4};
  const double b[] = {5, 6, 7, 8};
  for (Isa isa : {Isa::kScalar, Isa::kAvx2, Isa::kNeon}) {
    if (!supported(isa)) continue;
    double c[] = {1, 1, 1, 1};
    table(isa).gemm(2, 2, 2, a, b, c);
    EXPECT_DOUBLE_EQ(c[0], 20);
    EXPECT_DOUBLE_EQ(c[1], 23);
    EXPECT_DOUBLE_EQ(c[2], 44);
    EXPECT_DOUBLE_EQ(c[3], 51);
  }
}
