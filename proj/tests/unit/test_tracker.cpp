#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "mbptrack/data.hpp"
#include "mbptrack/tracker.hpp"
#include "test_util.hpp"

using namespace mbp;

namespace {

std::shared_ptr<const MbpNetwork> tiny_net() {
  static auto net = std::make_shared<const MbpNetwork>(mbp::testing::tiny_model());
  return net;
}

TrackerConfig tiny_cfg(std::size_t memory = 3) {
  TrackerConfig c;
  c.memory_size = memory;
  c.crop_size = 32;
  return c;
}

Sequence small_sequence(std::size_t length, std::uint64_t seed = 3) {
  SynthConfig s;
  s.seed = seed;
  s.target_points = 80;
  s.background_points = 40;
  return generate_sequence(s, length);
}

void fill_logits(ad::Var& v, double value) {
  Tensor t(v.rows(), v.cols(), value);
  v = ad::constant(t);
}

}  // namespace

TEST(Tracker, InitStoresGroundTruthEntry) {
  const Sequence seq = small_sequence(2);
  MbpTracker tr(tiny_net(), tiny_cfg());
  tr.init(seq.frames[0], seq.gt_boxes[0]);
  ASSERT_EQ(tr.memory().size(), 1u);
  EXPECT_EQ(tr.current_box(), seq.gt_boxes[0]);
  const FrameEntry& e = tr.memory().entries().front();
  EXPECT_EQ(e.coords.size(), 16u);
  EXPECT_EQ(e.ref_feats.size(), 2u);
  const TargetnessMask in_box = points_in_box(e.coords, seq.gt_boxes[0]);
  for (std::size_t i = 0; i < e.mask.size(); ++i) EXPECT_EQ(e.mask[i], in_box[i]) << i;
}

TEST(Tracker, StepBeforeInitThrows) {
  MbpTracker tr(tiny_net(), tiny_cfg());
  EXPECT_THROW(tr.step({}), std::logic_error);
  TrackerConfig bad = tiny_cfg();
  bad.crop_size = 64;
  EXPECT_THROW(MbpTracker(tiny_net(), bad), std::invalid_argument);
}

TEST(Tracker, LostFrameKeepsBoxAndMemory) {
  const Sequence seq = small_sequence(3);
  MbpTracker tr(tiny_net(), tiny_cfg());
  tr.init(seq.frames[0], seq.gt_boxes[0]);
  const auto before = tr.memory().fingerprint();
  tr.set_frame_hook([](FrameForward& f) { fill_logits(f.vote.mask_logits, std::log(0.19 / 0.81)); });
  const StepResult r = tr.step(seq.frames[1]);
  EXPECT_EQ(r.status, TrackStatus::kLost);
  EXPECT_EQ(r.box, seq.gt_boxes[0]);
  EXPECT_EQ(tr.memory().fingerprint(), before);
  EXPECT_EQ(tr.memory().size(), 1u);
  // Recovery: the next confident frame writes again.
  tr.set_frame_hook([](FrameForward& f) { fill_logits(f.vote.mask_logits, 3.0); });
  EXPECT_EQ(tr.step(seq.frames[2]).status, TrackStatus::kNormal);
  EXPECT_EQ(tr.memory().size(), 2u);
}

TEST(Tracker, MemoryIsBoundedFifo) {
  const Sequence seq = small_sequence(6);
  MbpTracker tr(tiny_net(), tiny_cfg(3));
  tr.set_frame_hook([](FrameForward& f) { fill_logits(f.vote.mask_logits, 3.0); });
  tr.init(seq.frames[0], seq.gt_boxes[0]);
  std::vector<PointCloud> written;
  for (std::size_t t = 1; t < 6; ++t) {
    tr.step(seq.frames[t]);
    written.push_back(tr.memory().entries().back().coords);
    EXPECT_LE(tr.memory().size(), 3u);
  }
  ASSERT_EQ(tr.memory().size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(tr.memory().entries()[i].coords, written[2 + i]);
}

TEST(Tracker, OracleHookRecoversRigidTranslation) {
  const Sequence seq = small_sequence(2);
  const Motion4DOF m{0.3, -0.1, 0.02, 0.0};
  std::vector<PointCloud> clouds{seq.frames[0]};
  std::vector<Box3D> boxes{seq.gt_boxes[0]};
  for (int t = 1; t < 5; ++t) {
    const Box3D next = apply_motion(boxes.back(), m);
    PointCloud c;
    for (const auto& p : clouds.back()) c.push_back(to_world(to_canonical(p, boxes.back()), next));
    clouds.push_back(c);
    boxes.push_back(next);
  }
  MbpTracker tr(tiny_net(), tiny_cfg());
  tr.set_frame_hook([&](FrameForward& f) {
    fill_logits(f.vote.mask_logits, 3.0);
    Tensor centers(f.proposals.size(), 3), params(f.proposals.size(), 4);
    centers(0, 0) = m.dx;
    centers(0, 1) = m.dy;
    centers(0, 2) = m.dz;
    Tensor scores(f.proposals.size(), 1, -5.0);
    scores[0] = 5.0;
    f.proposals.centers = ad::constant(centers);
    f.proposals.box_params = ad::constant(params);
    f.proposals.score_logits = ad::constant(scores);
  });
  const auto out = track_sequence(tr, clouds, boxes[0]);
  for (std::size_t t = 0; t < out.size(); ++t) {
    EXPECT_NEAR((out[t].box.center - boxes[t].center).norm(), 0.0, 1e-6) << t;
    EXPECT_NEAR(out[t].box.heading, boxes[t].heading, 1e-6);
  }
}

TEST(Tracker, DeterministicAndSizePreserving) {
  const Sequence seq = small_sequence(6);
  MbpTracker a(tiny_net(), tiny_cfg()), b(tiny_net(), tiny_cfg());
  const auto ra = track_sequence(a, seq.frames, seq.gt_boxes[0]);
  const auto rb = track_sequence(b, seq.frames, seq.gt_boxes[0]);
  ASSERT_EQ(ra.size(), 6u);
  for (std::size_t t = 0; t < 6; ++t) {
    EXPECT_EQ(ra[t].box, rb[t].box);
    EXPECT_EQ(ra[t].box.w, seq.gt_boxes[0].w);
    EXPECT_EQ(ra[t].box.l, seq.gt_boxes[0].l);
    EXPECT_EQ(ra[t].box.h, seq.gt_boxes[0].h);
  }
  // Re-init resets state.
  const auto rc = track_sequence(a, seq.frames, seq.gt_boxes[0]);
  EXPECT_EQ(rc.back().box, ra.back().box);
}

TEST(Tracker, SingleFrameAndEmptyCrop) {
  const Sequence seq = small_sequence(2);
  MbpTracker tr(tiny_net(), tiny_cfg());
  const auto out = track_sequence(tr, {seq.frames[0]}, seq.gt_boxes[0]);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].box, seq.gt_boxes[0]);
  const StepResult r = tr.step(PointCloud{{100, 100, 0}});
  EXPECT_EQ(r.status, TrackStatus::kLost);
  EXPECT_EQ(r.box, seq.gt_boxes[0]);
  EXPECT_THROW(tr.init(PointCloud{{100, 100, 0}}, seq.gt_boxes[0]), std::runtime_error);
}

TEST(Trajectory, RoundTripIsBitExact) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-50, 50);
  std::vector<TrajectoryRecord> recs;
  for (std::size_t i = 0; i < 20; ++i)
    recs.push_back({i, Box3D::make({u(rng), u(rng), u(rng)}, 1.0 + i * 0.1, 3.7, 1.5, u(rng) / 20),
                    i % 3 ? TrackStatus::kNormal : TrackStatus::kLost});
  std::stringstream ss;
  write_trajectory(ss, recs);
  const auto back = read_trajectory(ss);
  ASSERT_EQ(back.size(), recs.size());
  for (std::size_t i = 0; i < recs.size(); ++i) {
    EXPECT_EQ(back[i].frame, recs[i].frame);
    EXPECT_EQ(back[i].box, recs[i].box);
    EXPECT_EQ(back[i].status, recs[i].status);
  }
  std::stringstream bad("0 1 2 3 1 1 1 0 MAYBE\n");
  EXPECT_THROW(read_trajectory(bad), std::runtime_error);
  std::stringstream shortline("0 1 2\n");
  EXPECT_THROW(read_trajectory(shortline), std::runtime_error);
}
