#pragma once

#include <functional>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mbptrack/data.hpp"
#include "mbptrack/tracker.hpp"

namespace mbp {

// Success: area under f(t) = fraction{IoU > t}, t in [0, 1].
// Precision: area under g(t) = fraction{dist < t}, t in [0, 2] m, over 2.
// Both are reported on a 0-100 scale.
double success_auc(std::span<const double> ious);
double precision_auc(std::span<const double> dists, double max_dist = 2.0);

// Threshold-sampled variants (trapezoidal rule over a uniform grid).
double success_auc_discrete(std::span<const double> ious, double step);
double precision_auc_discrete(std::span<const double> dists, double step, double max_dist = 2.0);

struct CurvePoint {
  double threshold;
  double ratio;
};
std::vector<CurvePoint> success_curve(std::span<const double> ious, std::size_t samples = 101);
std::vector<CurvePoint> precision_curve(std::span<const double> dists, std::size_t samples = 101,
                                        double max_dist = 2.0);

struct OpeOptions {
  bool include_first_frame = false;
  // Distances beyond max_dist count as zero precision (clip) or are left out
  // of the precision average (drop).
  bool drop_far_frames = false;
  double max_dist = 2.0;
};

struct OpeResult {
  std::vector<double> ious;
  std::vector<double> distances;
  std::vector<StepResult> trajectory;
  double success = 0.0;
  double precision = 0.0;
  std::size_t frames = 0;
};

using TrackerFactory = std::function<std::unique_ptr<SotTracker>()>;

OpeResult ope_run(const TrackerFactory& factory, const Sequence& seq, const OpeOptions& opt = {});

// Returns ground truth every frame; fed the sequence it is evaluated on.
class OracleTracker final : public SotTracker {
 public:
  explicit OracleTracker(std::vector<Box3D> truth) : truth_(std::move(truth)) {}
  void init(const PointCloud&, const Box3D& first_box) override;
  StepResult step(const PointCloud&) override;

 private:
  std::vector<Box3D> truth_;
  std::size_t t_ = 0;
};

// Never moves the box.
class StaticTracker final : public SotTracker {
 public:
  void init(const PointCloud&, const Box3D& first_box) override { box_ = first_box; }
  StepResult step(const PointCloud&) override { return {box_, {}, TrackStatus::kNormal}; }

 private:
  Box3D box_;
};

struct CategoryRow {
  std::string category;
  double success = 0.0;
  double precision = 0.0;
  std::size_t frames = 0;
};

struct AggregateTable {
  std::vector<CategoryRow> categories;  // sorted by name
  CategoryRow mean;                      // category "Mean"
};

// Frame-weighted means per category, and over all categories.
AggregateTable aggregate(std::span<const std::pair<std::string, OpeResult>> results);

void write_table_text(std::ostream& os, const AggregateTable& table);
void write_table_csv(std::ostream& os, const AggregateTable& table);
void write_curve_csv(std::ostream& os, std::span<const CurvePoint> curve);
std::vector<CurvePoint> read_curve_csv(std::istream& is);

}  // namespace mbp
