#include "mbptrack/tracker.hpp"

#include <algorithm>
#include <charconv>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace mbp {

MbpTracker::MbpTracker(std::shared_ptr<const MbpNetwork> net, TrackerConfig cfg)
    : net_(std::move(net)), cfg_(cfg), memory_(cfg.memory_size), rng_(cfg.seed) {
  if (!net_) throw std::invalid_argument("tracker: null network");
  if (cfg_.crop_size != net_->config().backbone.input_points) {
    throw std::invalid_argument("tracker: crop_size " + std::to_string(cfg_.crop_size) +
                                " does not match the network input size " +
                                std::to_string(net_->config().backbone.input_points));
  }
}

void MbpTracker::init(const PointCloud& cloud, const Box3D& first_box) {
  rng_.seed(cfg_.seed);
  memory_ = MemoryBank(cfg_.memory_size);
  const SearchRegion crop = crop_search_region(cloud, first_box, cfg_.margin, cfg_.crop_size, rng_);
  if (crop.empty) throw std::runtime_error("tracker: no points around the initial box");
  const Box3D canonical_box{{}, first_box.w, first_box.l, first_box.h, 0.0};
  const TargetnessMask full_mask = points_in_box(crop.points, canonical_box);
  memory_.push(net_->bootstrap_entry(crop.points, full_mask, first_box));
  box_ = first_box;
  extent_ = grid_extent(first_box);
  status_ = TrackStatus::kNormal;
  frame_index_ = 1;
  initialized_ = true;
}

StepResult MbpTracker::step(const PointCloud& cloud) {
  if (!initialized_) throw std::logic_error("tracker: step() before init()");
  ++frame_index_;
  const SearchRegion crop = crop_search_region(cloud, box_, cfg_.margin, cfg_.crop_size, rng_);
  if (crop.empty) {
    status_ = TrackStatus::kLost;
    return {box_, TargetnessMask(net_->config().backbone.num_seeds, 0.0), status_};
  }
  const auto memory = memory_.view_in_frame(box_, memory_.capacity());
  FrameForward fwd = net_->forward(crop.points, memory, extent_);
  if (hook_) hook_(fwd);
  const TargetnessMask mask = fwd.vote.mask();
  const double peak = mask.empty() ? 0.0 : *std::max_element(mask.begin(), mask.end());
  if (peak < cfg_.lost_threshold) {
    status_ = TrackStatus::kLost;
    return {box_, mask, status_};
  }
  const Motion4DOF motion = select_best(fwd.proposals);
  const Box3D frame = box_;
  box_ = apply_motion(box_, motion);
  status_ = TrackStatus::kNormal;
  memory_.push(MbpNetwork::make_entry(fwd, mask, frame));
  return {box_, mask, status_};
}

std::vector<StepResult> track_sequence(SotTracker& tracker, const std::vector<PointCloud>& clouds,
                                       const Box3D& first_box) {
  if (clouds.empty()) throw std::invalid_argument("track_sequence: no frames");
  std::vector<StepResult> out;
  out.reserve(clouds.size());
  tracker.init(clouds[0], first_box);
  out.push_back({first_box, {}, TrackStatus::kNormal});
  for (std::size_t t = 1; t < clouds.size(); ++t) out.push_back(tracker.step(clouds[t]));
  return out;
}

std::string status_name(TrackStatus s) { return s == TrackStatus::kLost ? "LOST" : "NORMAL"; }

namespace {

std::string fmt(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace

void write_trajectory(std::ostream& os, const std::vector<TrajectoryRecord>& records) {
  os << "# frame x y z w l h heading status\n";
  for (const auto& r : records) {
    os << r.frame << ' ' << fmt(r.box.center.x) << ' ' << fmt(r.box.center.y) << ' '
       << fmt(r.box.center.z) << ' ' << fmt(r.box.w) << ' ' << fmt(r.box.l) << ' '
       << fmt(r.box.h) << ' ' << fmt(r.box.heading) << ' ' << status_name(r.status) << '\n';
  }
}

std::vector<TrajectoryRecord> read_trajectory(std::istream& is) {
  std::vector<TrajectoryRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    TrajectoryRecord r;
    double x, y, z, w, l, h, heading;
    std::string status;
    if (!(ss >> r.frame >> x >> y >> z >> w >> l >> h >> heading >> status)) {
      throw std::runtime_error("trajectory: malformed line " + std::to_string(lineno));
    }
    if (status != "NORMAL" && status != "LOST") {
      throw std::runtime_error("trajectory: bad status '" + status + "' on line " +
                               std::to_string(lineno));
    }
    r.box = Box3D::make({x, y, z}, w, l, h, heading);
    r.status = status == "LOST" ? TrackStatus::kLost : TrackStatus::kNormal;
    out.push_back(r);
  }
  return out;
}

}  // namespace mbp
