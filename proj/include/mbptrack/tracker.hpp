#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "mbptrack/defpm.hpp"
#include "mbptrack/geometry.hpp"
#include "mbptrack/model.hpp"

namespace mbp {

enum class TrackStatus { kNormal, kLost };

struct StepResult {
  Box3D box;            // world frame
  TargetnessMask mask;  // seed resolution
  TrackStatus status = TrackStatus::kNormal;
};

// Interface shared by the learned tracker and evaluation baselines.
class SotTracker {
 public:
  virtual ~SotTracker() = default;
  virtual void init(const PointCloud& cloud, const Box3D& first_box) = 0;
  virtual StepResult step(const PointCloud& cloud) = 0;
};

struct TrackerConfig {
  std::size_t memory_size = 3;  // test-time T
  std::size_t crop_size = 128;
  double margin = 2.0;
  double lost_threshold = 0.2;
  std::uint64_t seed = 0;
};

class MbpTracker final : public SotTracker {
 public:
  MbpTracker(std::shared_ptr<const MbpNetwork> net, TrackerConfig cfg);

  void init(const PointCloud& cloud, const Box3D& first_box) override;
  StepResult step(const PointCloud& cloud) override;

  const MemoryBank& memory() const { return memory_; }
  const Box3D& current_box() const { return box_; }
  TrackStatus status() const { return status_; }
  std::size_t frame_index() const { return frame_index_; }
  const TrackerConfig& config() const { return cfg_; }

  // Test hook: runs on every step's forward pass before the lost check and
  // the memory write.
  void set_frame_hook(std::function<void(FrameForward&)> hook) { hook_ = std::move(hook); }

 private:
  std::shared_ptr<const MbpNetwork> net_;
  TrackerConfig cfg_;
  MemoryBank memory_;
  Box3D box_;
  Vec3 extent_;
  TrackStatus status_ = TrackStatus::kNormal;
  std::size_t frame_index_ = 0;
  bool initialized_ = false;
  std::mt19937_64 rng_;
  std::function<void(FrameForward&)> hook_;
};

// Initializes on the first frame and steps through the rest; output[0] is
// the given box.
std::vector<StepResult> track_sequence(SotTracker& tracker, const std::vector<PointCloud>& clouds,
                                       const Box3D& first_box);

// Trajectory text format, one record per line:
//   frame x y z w l h heading status
// status is NORMAL or LOST; numbers use shortest round-trip decimal text.
struct TrajectoryRecord {
  std::size_t frame = 0;
  Box3D box;
  TrackStatus status = TrackStatus::kNormal;
};

void write_trajectory(std::ostream& os, const std::vector<TrajectoryRecord>& records);
std::vector<TrajectoryRecord> read_trajectory(std::istream& is);
std::string status_name(TrackStatus s);

}  // namespace mbp
