#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <sstream>

#include "mbptrack/eval.hpp"

using namespace mbp;

namespace {

std::vector<double> uniform(std::size_t n, double lo, double hi, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

// Mean of the per-frame integrals: each frame contributes its IoU (the
// length of t in [0, 1] with IoU > t) and 1 - d/2 clipped at 0.
double success_oracle(const std::vector<double>& ious) {
  double s = 0;
  for (double v : ious) s += std::clamp(v, 0.0, 1.0);
  return 100.0 * s / static_cast<double>(ious.size());
}
double precision_oracle(const std::vector<double>& d) {
  double s = 0;
  for (double v : d) s += std::max(0.0, 1.0 - v / 2.0);
  return 100.0 * s / static_cast<double>(d.size());
}

Sequence sequence(std::size_t n, const std::string& cat = "Car") {
  SynthConfig c;
  c.seed = 9;
  Sequence s = generate_sequence(c, n);
  s.category = cat;
  return s;
}

}  // namespace

TEST(Auc, Examples) {
  EXPECT_DOUBLE_EQ(success_auc(std::vector<double>{1.0, 1.0, 1.0}), 100.0);
  EXPECT_DOUBLE_EQ(success_auc(std::vector<double>{0.5, 0.5}), 50.0);
  EXPECT_DOUBLE_EQ(success_auc(std::vector<double>{0.0}), 0.0);
  EXPECT_DOUBLE_EQ(precision_auc(std::vector<double>{0.0}), 100.0);
  EXPECT_DOUBLE_EQ(precision_auc(std::vector<double>{1.0}), 50.0);
  EXPECT_DOUBLE_EQ(precision_auc(std::vector<double>{2.0, 3.5}), 0.0);
  EXPECT_THROW(success_auc(std::vector<double>{}), std::invalid_argument);
}

TEST(Auc, ClosedFormMatchesOracle) {
  std::mt19937_64 rng(1);
  for (int t = 0; t < 50; ++t) {
    const auto i = uniform(37, 0, 1, rng), d = uniform(37, 0, 3, rng);
    EXPECT_NEAR(success_auc(i), success_oracle(i), 1e-9);
    EXPECT_NEAR(precision_auc(d), precision_oracle(d), 1e-9);
  }
}

TEST(Auc, DiscreteConvergesToClosedForm) {
  std::mt19937_64 rng(2);
  const auto i = uniform(200, 0, 1, rng), d = uniform(200, 0, 2.5, rng);
  EXPECT_NEAR(success_auc_discrete(i, 1e-3), success_auc(i), 0.1);
  EXPECT_NEAR(precision_auc_discrete(d, 1e-3), precision_auc(d), 0.1);
}

TEST(Auc, MonotoneAndOrderInvariant) {
  std::mt19937_64 rng(3);
  auto i = uniform(30, 0, 0.9, rng), d = uniform(30, 0.1, 2.5, rng);
  const double s = success_auc(i), p = precision_auc(d);
  auto i2 = i, d2 = d;
  i2[4] += 0.05;
  d2[4] -= 0.05;
  EXPECT_GE(success_auc(i2), s);
  EXPECT_GE(precision_auc(d2), p);
  std::shuffle(i.begin(), i.end(), rng);
  std::shuffle(d.begin(), d.end(), rng);
  EXPECT_NEAR(success_auc(i), s, 1e-12);
  EXPECT_NEAR(precision_auc(d), p, 1e-12);
}

TEST(Curves, ShapeAndCsvRoundTrip) {
  std::mt19937_64 rng(4);
  const auto i = uniform(20, 0, 1, rng);
  const auto c = success_curve(i);
  ASSERT_EQ(c.size(), 101u);
  EXPECT_EQ(c.front().threshold, 0.0);
  EXPECT_EQ(c.back().threshold, 1.0);
  for (std::size_t k = 1; k < c.size(); ++k) EXPECT_LE(c[k].ratio, c[k - 1].ratio);
  const auto pc = precision_curve(uniform(20, 0, 3, rng));
  EXPECT_EQ(pc.back().threshold, 2.0);
  std::stringstream ss;
  write_curve_csv(ss, c);
  const auto back = read_curve_csv(ss);
  ASSERT_EQ(back.size(), c.size());
  for (std::size_t k = 0; k < c.size(); ++k) {
    EXPECT_EQ(back[k].threshold, c[k].threshold);
    EXPECT_EQ(back[k].ratio, c[k].ratio);
  }
}

TEST(Ope, OracleScoresPerfect) {
  const Sequence s = sequence(7);
  const OpeResult r = ope_run([&] { return std::make_unique<OracleTracker>(s.gt_boxes); }, s);
  EXPECT_EQ(r.frames, 6u);
  EXPECT_NEAR(r.success, 100.0, 1e-9);
  EXPECT_NEAR(r.precision, 100.0, 1e-9);
  OpeOptions with_first;
  with_first.include_first_frame = true;
  EXPECT_EQ(ope_run([&] { return std::make_unique<OracleTracker>(s.gt_boxes); }, s, with_first).frames,
            7u);
}

TEST(Ope, StaticTrackerMatchesHandComputed) {
  const Sequence s = sequence(6);
  const OpeResult r = ope_run([] { return std::make_unique<StaticTracker>(); }, s);
  ASSERT_EQ(r.ious.size(), 5u);
  for (std::size_t t = 1; t < 6; ++t) {
    EXPECT_NEAR(r.ious[t - 1], iou3d(s.gt_boxes[0], s.gt_boxes[t]), 1e-12);
    EXPECT_NEAR(r.distances[t - 1], (s.gt_boxes[0].center - s.gt_boxes[t].center).norm(), 1e-12);
  }
  EXPECT_NEAR(r.success, success_oracle(r.ious), 1e-9);
  EXPECT_NEAR(r.precision, precision_oracle(r.distances), 1e-9);
}

TEST(Ope, ClipVersusDropForFarFrames) {
  // Precision over {0, 3}: clipping gives (100 + 0) / 2, dropping keeps only 0.
  OpeOptions drop;
  drop.drop_far_frames = true;
  Sequence s = sequence(3);
  s.gt_boxes[1] = s.gt_boxes[0];
  s.gt_boxes[2] = s.gt_boxes[0];
  s.gt_boxes[2].center.x += 3.0;
  const auto f = [] { return std::make_unique<StaticTracker>(); };
  EXPECT_NEAR(ope_run(f, s).precision, 50.0, 1e-9);
  EXPECT_NEAR(ope_run(f, s, drop).precision, 100.0, 1e-9);
}

TEST(Aggregate, FrameWeightedMean) {
  OpeResult a, b, c;
  a.success = 100;
  a.precision = 100;
  a.frames = 30;
  b.success = 50;
  b.precision = 40;
  b.frames = 10;
  c.success = 0;
  c.precision = 0;
  c.frames = 0;
  std::vector<std::pair<std::string, OpeResult>> rs{{"Ped", b}, {"Car", a}};
  const AggregateTable t = aggregate(rs);
  ASSERT_EQ(t.categories.size(), 2u);
  EXPECT_EQ(t.categories[0].category, "Car");
  EXPECT_DOUBLE_EQ(t.mean.success, (100.0 * 30 + 50.0 * 10) / 40);
  EXPECT_DOUBLE_EQ(t.mean.precision, 85.0);
  EXPECT_EQ(t.mean.frames, 40u);
  // Two sequences of one category are pooled by frames as well.
  std::vector<std::pair<std::string, OpeResult>> same{{"Car", a}, {"Car", b}};
  EXPECT_DOUBLE_EQ(aggregate(same).categories[0].success, 87.5);
  std::vector<std::pair<std::string, OpeResult>> empty{{"Car", c}};
  EXPECT_THROW(aggregate(empty), std::invalid_argument);
  std::ostringstream txt, csv;
  write_table_text(txt, t);
  write_table_csv(csv, t);
  EXPECT_NE(txt.str().find("Mean"), std::string::npos);
  EXPECT_NE(csv.str().find("Car,"), std::string::npos);
}
