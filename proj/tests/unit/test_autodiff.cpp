#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "mbptrack/autodiff.hpp"
#include "mbptrack/tensor.hpp"
#include "test_util.hpp"

using namespace mbp;
using mbp::testing::grad_check;
using mbp::testing::random_tensor;

namespace {

ad::Var param(std::size_t r, std::size_t c, std::mt19937_64& rng) {
  return ad::Var(random_tensor(r, c, rng), true);
}

// Reduces any tensor to a scalar with fixed random weights so every entry's
// gradient is distinct.
ad::Var reduce(const ad::Var& x, std::uint64_t seed = 99) {
  std::mt19937_64 rng(seed);
  return ad::sum(ad::mul(x, ad::constant(random_tensor(x.rows(), x.cols(), rng))));
}

void expect_grads_ok(const std::function<ad::Var()>& f,
                     std::vector<std::pair<std::string, ad::Var>> vars) {
  std::mt19937_64 rng(5);
  const auto rep = grad_check(f, std::move(vars), 64, rng);
  EXPECT_LT(rep.max_rel_error, 1e-6) << rep.worst;
  EXPECT_GT(rep.checked, 0u);
}

}  // namespace

TEST(Tensor, MatmulMatchesHandComputed) {
  const Tensor a(2, 3, {1, 2, 3, 4, 5, 6});
  const Tensor b(3, 2, {7, 8, 9, 10, 11, 12});
  const Tensor c = matmul(a, b);
  EXPECT_EQ(c, Tensor(2, 2, {58, 64, 139, 154}));
  EXPECT_EQ(matmul(b, a, true, true), c.transposed());
}

TEST(Tensor, ShapeMismatchThrows) {
  EXPECT_THROW(matmul(Tensor(2, 3), Tensor(2, 3)), std::invalid_argument);
}

TEST(Autodiff, MatmulVariants) {
  std::mt19937_64 rng(1);
  auto a = param(5, 4, rng), b = param(4, 3, rng), c = param(6, 4, rng);
  expect_grads_ok([&] { return reduce(ad::matmul(a, b)); }, {{"a", a}, {"b", b}});
  expect_grads_ok([&] { return reduce(ad::matmul_nt(a, c)); }, {{"a", a}, {"c", c}});
}

TEST(Autodiff, ElementwiseOps) {
  std::mt19937_64 rng(2);
  auto a = param(4, 3, rng), b = param(4, 3, rng), row = param(1, 3, rng);
  expect_grads_ok([&] { return reduce(ad::add(a, b)); }, {{"a", a}, {"b", b}});
  expect_grads_ok([&] { return reduce(ad::sub(a, b)); }, {{"a", a}, {"b", b}});
  expect_grads_ok([&] { return reduce(ad::mul(a, b)); }, {{"a", a}, {"b", b}});
  expect_grads_ok([&] { return reduce(ad::add_row(a, row)); }, {{"a", a}, {"row", row}});
  expect_grads_ok([&] { return reduce(ad::scale(a, -2.5)); }, {{"a", a}});
  expect_grads_ok([&] { return reduce(ad::relu(a)); }, {{"a", a}});
  expect_grads_ok([&] { return reduce(ad::sigmoid(a)); }, {{"a", a}});
}

TEST(Autodiff, NormalisationOps) {
  std::mt19937_64 rng(3);
  auto x = param(5, 6, rng), g = param(1, 6, rng), b = param(1, 6, rng);
  expect_grads_ok([&] { return reduce(ad::layer_norm(x, g, b)); }, {{"x", x}, {"g", g}, {"b", b}});
  expect_grads_ok([&] { return reduce(ad::softmax_rows(x)); }, {{"x", x}});
}

TEST(Autodiff, SoftmaxRowsSumToOne) {
  std::mt19937_64 rng(4);
  const auto s = ad::softmax_rows(ad::constant(random_tensor(7, 9, rng, 30.0)));
  for (std::size_t r = 0; r < 7; ++r) {
    double sum = 0;
    for (double v : s.value().row(r)) sum += v;
    EXPECT_NEAR(sum, 1.0, 1e-12);
  }
}

TEST(Autodiff, StructuralOps) {
  std::mt19937_64 rng(6);
  auto a = param(4, 3, rng), b = param(4, 2, rng), c = param(2, 3, rng);
  expect_grads_ok([&] {
    const ad::Var parts[] = {a, b};
    return reduce(ad::concat_cols(parts));
  }, {{"a", a}, {"b", b}});
  expect_grads_ok([&] {
    const ad::Var parts[] = {a, c};
    return reduce(ad::concat_rows(parts));
  }, {{"a", a}, {"c", c}});
  expect_grads_ok([&] { return reduce(ad::slice_cols(a, 1, 2)); }, {{"a", a}});
  const std::size_t idx[] = {3, 0, 0, 2, 1};
  expect_grads_ok([&] { return reduce(ad::gather_rows(a, idx)); }, {{"a", a}});
  const std::ptrdiff_t blk[] = {0, -1, 3, 2, 2, -1};
  expect_grads_ok([&] { return reduce(ad::gather_blocks(a, blk, 2)); }, {{"a", a}});
}

TEST(Autodiff, GatherBlocksZeroPads) {
  const auto a = ad::constant(Tensor(2, 2, {1, 2, 3, 4}));
  const std::ptrdiff_t idx[] = {1, -1};
  const auto out = ad::gather_blocks(a, idx, 2);
  EXPECT_EQ(out.value(), Tensor(1, 4, {3, 4, 0, 0}));
}

TEST(Autodiff, GroupMax) {
  std::mt19937_64 rng(7);
  auto a = param(6, 3, rng);
  expect_grads_ok([&] { return reduce(ad::group_max(a, 3)); }, {{"a", a}});
  const auto m = ad::group_max(ad::constant(Tensor(2, 1, {-1, 4})), 2);
  EXPECT_EQ(m.value()[0], 4);
}

TEST(Autodiff, Reductions) {
  std::mt19937_64 rng(8);
  auto a = param(4, 3, rng);
  const std::vector<double> w{0.5, -1.0, 2.0, 0.25};
  expect_grads_ok([&] { return ad::row_weighted_sum(ad::mul(a, a), w); }, {{"a", a}});
  const std::vector<double> labels{1, 0, 1, 0};
  auto logits = param(4, 1, rng);
  expect_grads_ok([&] { return ad::bce_with_logits_sum(logits, labels, w); },
                  {{"logits", logits}});
  const Tensor target = random_tensor(4, 3, rng, 2.0);
  expect_grads_ok([&] { return ad::smooth_l1_sum(a, target, w, 1.0); }, {{"a", a}});
}

TEST(Autodiff, BceWithLogitsIsStableForLargeLogits) {
  const auto l = ad::constant(Tensor(2, 1, {800.0, -800.0}));
  const std::vector<double> labels{0, 1}, w{1, 1};
  const auto v = ad::bce_with_logits_sum(l, labels, w).value()[0];
  EXPECT_TRUE(std::isfinite(v));
  EXPECT_NEAR(v, 1600.0, 1e-9);
}

TEST(Autodiff, GradientAccumulatesThroughSharedUse) {
  auto x = ad::Var(Tensor(1, 1, {3.0}), true);
  ad::backward(ad::sum(ad::mul(x, x)));
  EXPECT_DOUBLE_EQ(x.grad()[0], 6.0);
  ad::backward(ad::sum(ad::mul(x, x)));
  EXPECT_DOUBLE_EQ(x.grad()[0], 12.0);
}

TEST(Autodiff, ConstantsRecordNoTape) {
  const auto a = ad::constant(Tensor(2, 2, 1.0));
  const auto b = ad::matmul(a, a);
  EXPECT_FALSE(b.requires_grad());
  EXPECT_TRUE(b.node()->inputs.empty());
}

TEST(Autodiff, DetachBlocksGradient) {
  auto x = ad::Var(Tensor(1, 1, {2.0}), true);
  ad::backward(ad::sum(ad::mul(ad::detach(x), x)));
  EXPECT_DOUBLE_EQ(x.grad()[0], 2.0);
}

TEST(Autodiff, BackwardRequiresScalar) {
  auto x = ad::Var(Tensor(2, 1, 1.0), true);
  EXPECT_THROW(ad::backward(x), std::invalid_argument);
}
