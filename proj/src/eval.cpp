#include "mbptrack/eval.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace mbp {
namespace {

void require_nonempty(std::span<const double> v, const char* what) {
  if (v.empty()) throw std::invalid_argument(std::string(what) + ": empty input");
}

double frac_iou_above(std::span<const double> ious, double t) {
  std::size_t c = 0;
  for (double v : ious) c += v > t ? 1 : 0;
  return static_cast<double>(c) / static_cast<double>(ious.size());
}

double frac_dist_below(std::span<const double> d, double t) {
  std::size_t c = 0;
  for (double v : d) c += v < t ? 1 : 0;
  return static_cast<double>(c) / static_cast<double>(d.size());
}

template <typename F>
double trapezoid(F f, double lo, double hi, double step) {
  if (!(step > 0.0)) throw std::invalid_argument("AUC step must be positive");
  const auto n = static_cast<std::size_t>(std::llround((hi - lo) / step));
  if (n == 0) throw std::invalid_argument("AUC step larger than the range");
  const double h = (hi - lo) / static_cast<double>(n);
  double s = 0.5 * (f(lo) + f(hi));
  for (std::size_t i = 1; i < n; ++i) s += f(lo + h * static_cast<double>(i));
  return s * h;
}

}  // namespace

double success_auc(std::span<const double> ious) {
  require_nonempty(ious, "success_auc");
  double s = 0.0;
  for (double v : ious) {
    if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("success_auc: IoU outside [0,1]");
    s += v;
  }
  return 100.0 * s / static_cast<double>(ious.size());
}

double precision_auc(std::span<const double> dists, double max_dist) {
  require_nonempty(dists, "precision_auc");
  double s = 0.0;
  for (double d : dists) {
    if (!(d >= 0.0)) throw std::invalid_argument("precision_auc: negative distance");
    s += 1.0 - std::min(d, max_dist) / max_dist;
  }
  return 100.0 * s / static_cast<double>(dists.size());
}

double success_auc_discrete(std::span<const double> ious, double step) {
  require_nonempty(ious, "success_auc_discrete");
  return 100.0 * trapezoid([&](double t) { return frac_iou_above(ious, t); }, 0.0, 1.0, step);
}

double precision_auc_discrete(std::span<const double> dists, double step, double max_dist) {
  require_nonempty(dists, "precision_auc_discrete");
  return 100.0 *
         trapezoid([&](double t) { return frac_dist_below(dists, t); }, 0.0, max_dist, step) /
         max_dist;
}

std::vector<CurvePoint> success_curve(std::span<const double> ious, std::size_t samples) {
  require_nonempty(ious, "success_curve");
  if (samples < 2) throw std::invalid_argument("success_curve: need >= 2 samples");
  std::vector<CurvePoint> out;
  for (std::size_t i = 0; i < samples; ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(samples - 1);
    out.push_back({t, frac_iou_above(ious, t)});
  }
  return out;
}

std::vector<CurvePoint> precision_curve(std::span<const double> dists, std::size_t samples,
                                        double max_dist) {
  require_nonempty(dists, "precision_curve");
  if (samples < 2) throw std::invalid_argument("precision_curve: need >= 2 samples");
  std::vector<CurvePoint> out;
  for (std::size_t i = 0; i < samples; ++i) {
    const double t = max_dist * static_cast<double>(i) / static_cast<double>(samples - 1);
    out.push_back({t, frac_dist_below(dists, t)});
  }
  return out;
}

void OracleTracker::init(const PointCloud&, const Box3D&) { t_ = 0; }

StepResult OracleTracker::step(const PointCloud&) {
  ++t_;
  if (t_ >= truth_.size()) throw std::out_of_range("oracle tracker: ran past the sequence");
  return {truth_[t_], {}, TrackStatus::kNormal};
}

OpeResult ope_run(const TrackerFactory& factory, const Sequence& seq, const OpeOptions& opt) {
  seq.validate();
  std::unique_ptr<SotTracker> tracker = factory();
  if (!tracker) throw std::invalid_argument("ope_run: factory returned no tracker");
  OpeResult r;
  r.trajectory = track_sequence(*tracker, seq.frames, seq.gt_boxes.front());
  std::vector<double> kept_dists;
  for (std::size_t t = opt.include_first_frame ? 0 : 1; t < seq.size(); ++t) {
    const Box3D& pred = r.trajectory[t].box;
    const Box3D& gt = seq.gt_boxes[t];
    r.ious.push_back(iou3d(pred, gt));
    const double d = (pred.center - gt.center).norm();
    r.distances.push_back(d);
    if (!opt.drop_far_frames || d <= opt.max_dist) kept_dists.push_back(d);
  }
  r.frames = r.ious.size();
  r.success = success_auc(r.ious);
  r.precision = kept_dists.empty() ? 0.0 : precision_auc(kept_dists, opt.max_dist);
  return r;
}

AggregateTable aggregate(std::span<const std::pair<std::string, OpeResult>> results) {
  struct Acc {
    double s = 0, p = 0;
    std::size_t n = 0;
  };
  std::map<std::string, Acc> by_cat;
  Acc total;
  for (const auto& [cat, r] : results) {
    const double n = static_cast<double>(r.frames);
    auto& a = by_cat[cat];
    a.s += r.success * n;
    a.p += r.precision * n;
    a.n += r.frames;
  }
  AggregateTable out;
  for (const auto& [cat, a] : by_cat) {
    if (a.n == 0) continue;
    const double n = static_cast<double>(a.n);
    out.categories.push_back({cat, a.s / n, a.p / n, a.n});
    total.s += a.s;
    total.p += a.p;
    total.n += a.n;
  }
  if (total.n == 0) throw std::invalid_argument("aggregate: zero total frames");
  const double n = static_cast<double>(total.n);
  out.mean = {"Mean", total.s / n, total.p / n, total.n};
  return out;
}

void write_table_text(std::ostream& os, const AggregateTable& table) {
  os << std::left << std::setw(14) << "Category" << std::right << std::setw(10) << "Success"
     << std::setw(11) << "Precision" << std::setw(9) << "Frames" << '\n';
  auto row = [&](const CategoryRow& r) {
    os << std::left << std::setw(14) << r.category << std::right << std::fixed
       << std::setprecision(2) << std::setw(10) << r.success << std::setw(11) << r.precision
       << std::setw(9) << r.frames << '\n';
  };
  for (const auto& r : table.categories) row(r);
  row(table.mean);
  os.unsetf(std::ios::floatfield);
}

void write_table_csv(std::ostream& os, const AggregateTable& table) {
  os << "category,success,precision,frames\n";
  auto row = [&](const CategoryRow& r) {
    os << r.category << ',' << std::setprecision(17) << r.success << ',' << r.precision << ','
       << r.frames << '\n';
  };
  for (const auto& r : table.categories) row(r);
  row(table.mean);
}

void write_curve_csv(std::ostream& os, std::span<const CurvePoint> curve) {
  os << "threshold,ratio\n";
  for (const auto& p : curve) os << std::setprecision(17) << p.threshold << ',' << p.ratio << '\n';
}

std::vector<CurvePoint> read_curve_csv(std::istream& is) {
  std::vector<CurvePoint> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (lineno == 1 || line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) {
      throw std::runtime_error("curve file: malformed line " + std::to_string(lineno));
    }
    try {
      out.push_back({std::stod(line.substr(0, comma)), std::stod(line.substr(comma + 1))});
    } catch (const std::exception&) {
      throw std::runtime_error("curve file: malformed number on line " + std::to_string(lineno));
    }
  }
  return out;
}

}  // namespace mbp
