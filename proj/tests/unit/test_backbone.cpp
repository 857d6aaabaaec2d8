#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <random>

#include "mbptrack/backbone.hpp"
#include "mbptrack/sampling.hpp"
#include "test_util.hpp"

using namespace mbp;
using mbp::testing::random_cloud;

namespace {

struct Fixture {
  nn::ParameterStore store;
  std::mt19937_64 rng{3};
  Backbone net;
  explicit Fixture(const BackboneConfig& cfg) : net(store, cfg, rng) {}
};

BackboneConfig small_cfg() {
  BackboneConfig c;
  c.input_points = 16;
  c.num_seeds = 8;
  c.channels = 6;
  c.edge_widths = {4, 5};
  c.edge_k = 4;
  c.group_k = 3;
  return c;
}

bool contains(const PointCloud& set, const Vec3& p) {
  return std::find(set.begin(), set.end(), p) != set.end();
}

}  // namespace

TEST(Backbone, DefaultShapeContract) {
  Fixture f{BackboneConfig{}};
  std::mt19937_64 rng(1);
  const PointCloud cloud = random_cloud(128, rng);
  const SeedFeatures s = f.net.extract(cloud);
  EXPECT_EQ(s.coords.size(), 64u);
  EXPECT_EQ(s.feats.rows(), 64u);
  EXPECT_EQ(s.feats.cols(), 128u);
  EXPECT_TRUE(s.feats.value().all_finite());
}

TEST(Backbone, ThreeEdgeLayersEndingAtC) {
  Fixture f{BackboneConfig{}};
  EXPECT_TRUE(f.store.find("backbone.edge2.w_point").defined());
  EXPECT_EQ(f.store.find("backbone.edge0.w_point").cols(), 32u);
  EXPECT_EQ(f.store.find("backbone.edge1.w_point").cols(), 64u);
  EXPECT_EQ(f.store.find("backbone.edge2.w_point").cols(), 128u);
}

TEST(Backbone, ZeroParametersGiveZeroFeatures) {
  Fixture f{small_cfg()};
  for (auto& e : f.store.entries()) e.var.mutable_value().fill(0.0);
  std::mt19937_64 rng(2);
  const PointCloud cloud = random_cloud(16, rng);
  const SeedFeatures s = f.net.extract(cloud);
  EXPECT_EQ(s.feats.value().max_abs(), 0.0);
  for (const auto& p : s.coords) EXPECT_TRUE(contains(cloud, p));
}

TEST(Backbone, DuplicatedCloudSeedsAreInputPoints) {
  Fixture f{small_cfg()};
  std::mt19937_64 rng(3);
  const PointCloud half = random_cloud(8, rng);
  PointCloud cloud = half;
  cloud.insert(cloud.end(), half.begin(), half.end());
  const SeedFeatures s = f.net.extract(cloud);
  for (const auto& p : s.coords) EXPECT_TRUE(contains(half, p));
}

TEST(Backbone, TooFewPointsThrows) {
  Fixture f{small_cfg()};
  std::mt19937_64 rng(4);
  EXPECT_THROW(f.net.extract(random_cloud(7, rng)), std::invalid_argument);
}

TEST(Backbone, PermutationInvariantAsSet) {
  Fixture f{small_cfg()};
  std::mt19937_64 rng(5);
  const PointCloud cloud = random_cloud(16, rng);
  PointCloud perm = cloud;
  std::shuffle(perm.begin(), perm.end(), rng);
  const SeedFeatures a = f.net.extract(cloud), b = f.net.extract(perm);
  ASSERT_EQ(a.coords.size(), b.coords.size());
  for (std::size_t i = 0; i < a.coords.size(); ++i) {
    const auto it = std::find(b.coords.begin(), b.coords.end(), a.coords[i]);
    ASSERT_NE(it, b.coords.end());
    const std::size_t j = static_cast<std::size_t>(it - b.coords.begin());
    for (std::size_t c = 0; c < a.feats.cols(); ++c)
      EXPECT_NEAR(a.feats.value()(i, c), b.feats.value()(j, c), 1e-9);
  }
}

TEST(Backbone, FeaturesDependOnlyOnCanonicalCrop) {
  // Moving the scene and the reference box together leaves the crop, and so
  // the features, unchanged.
  Fixture f{small_cfg()};
  std::mt19937_64 rng(6);
  const PointCloud scene = random_cloud(30, rng, 1.5);
  const Box3D box = Box3D::make({0.2, -0.1, 0}, 1, 2, 1, 0.4);
  const Vec3 t{13.0, -7.0, 2.0};
  PointCloud moved = scene;
  for (auto& p : moved) p = p + t;
  Box3D moved_box = box;
  moved_box.center = box.center + t;
  std::mt19937_64 r1(9), r2(9);
  const auto c1 = crop_search_region(scene, box, 0.5, 16, r1);
  const auto c2 = crop_search_region(moved, moved_box, 0.5, 16, r2);
  const SeedFeatures a = f.net.extract(c1.points), b = f.net.extract(c2.points);
  EXPECT_LT(max_abs_diff(a.feats.value(), b.feats.value()), 1e-6);
}

TEST(DownsampleMask, ConstantMasks) {
  Fixture f{small_cfg()};
  std::mt19937_64 rng(7);
  const PointCloud cloud = random_cloud(16, rng);
  const SeedFeatures s = f.net.extract(cloud);
  EXPECT_EQ(downsample_mask(TargetnessMask(16, 1.0), cloud, s), TargetnessMask(8, 1.0));
  EXPECT_EQ(downsample_mask(TargetnessMask(16, 0.0), cloud, s), TargetnessMask(8, 0.0));
}

TEST(DownsampleMask, MixedMaskFollowsFpsIndex) {
  Fixture f{small_cfg()};
  std::mt19937_64 rng(8);
  const PointCloud cloud = random_cloud(16, rng);
  TargetnessMask full(16);
  for (std::size_t i = 0; i < 16; ++i) full[i] = static_cast<double>(i) / 16.0;
  const SeedFeatures s = f.net.extract(cloud);
  const auto idx = farthest_point_sample(cloud, 8, nearest_to_origin(cloud));
  const TargetnessMask got = downsample_mask(full, cloud, s);
  for (std::size_t i = 0; i < 8; ++i) EXPECT_EQ(got[i], full[idx[i]]);
  EXPECT_THROW(downsample_mask(TargetnessMask(3, 0.0), cloud, s), std::invalid_argument);
}

TEST(Backbone, GradientsMatchFiniteDifferences) {
  Fixture f{small_cfg()};
  std::mt19937_64 rng(9);
  const PointCloud cloud = random_cloud(16, rng);
  const Tensor w = mbp::testing::random_tensor(8, 6, rng);
  std::vector<std::pair<std::string, ad::Var>> vars;
  for (const auto& e : f.store.entries()) vars.emplace_back(e.name, e.var);
  const auto rep = mbp::testing::grad_check(
      [&] { return ad::sum(ad::mul(f.net.extract(cloud).feats, ad::constant(w))); }, vars, 12, rng);
  EXPECT_LT(rep.max_rel_error, 1e-4) << rep.worst;
}
