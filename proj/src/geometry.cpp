#include "mbptrack/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace mbp {

double Vec3::norm() const { return std::sqrt(squared_norm()); }

Box3D Box3D::make(Vec3 center, double w, double l, double h, double heading) {
  if (!(w > 0.0 && l > 0.0 && h > 0.0)) {
    throw std::invalid_argument("Box3D: size must be positive");
  }
  if (!std::isfinite(center.x) || !std::isfinite(center.y) || !std::isfinite(center.z) ||
      !std::isfinite(w) || !std::isfinite(l) || !std::isfinite(h) || !std::isfinite(heading)) {
    throw std::invalid_argument("Box3D: non-finite value");
  }
  return Box3D{center, w, l, h, normalize_angle(heading)};
}

double normalize_angle(double a) {
  constexpr double kPi = std::numbers::pi;
  if (a > -kPi && a <= kPi) return a;
  double r = std::fmod(a + kPi, 2.0 * kPi);
  if (r <= 0.0) r += 2.0 * kPi;
  return r - kPi;
}

Vec3 rotate_z(const Vec3& p, double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  return {c * p.x - s * p.y, s * p.x + c * p.y, p.z};
}

Vec3 to_canonical(const Vec3& p, const Box3D& frame) {
  return rotate_z(p - frame.center, -frame.heading);
}

Vec3 to_world(const Vec3& p, const Box3D& frame) {
  return rotate_z(p, frame.heading) + frame.center;
}

bool point_in_box(const Vec3& p, const Box3D& box) {
  const Vec3 q = to_canonical(p, box);
  return std::abs(q.x) <= 0.5 * box.l && std::abs(q.y) <= 0.5 * box.w &&
         std::abs(q.z) <= 0.5 * box.h;
}

TargetnessMask points_in_box(const PointCloud& cloud, const Box3D& box) {
  TargetnessMask mask(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) mask[i] = point_in_box(cloud[i], box) ? 1.0 : 0.0;
  return mask;
}

Box3D apply_motion(const Box3D& box, const Motion4DOF& m) {
  Box3D out = box;
  out.center = box.center + rotate_z({m.dx, m.dy, m.dz}, box.heading);
  out.heading = normalize_angle(box.heading + m.dtheta);
  return out;
}

Motion4DOF relative_motion(const Box3D& from, const Box3D& to) {
  const Vec3 d = to_canonical(to.center, from);
  return {d.x, d.y, d.z, normalize_angle(to.heading - from.heading)};
}

PointCloud canonicalize(const PointCloud& cloud, const Box3D& frame) {
  PointCloud out;
  out.reserve(cloud.size());
  for (const auto& p : cloud) out.push_back(to_canonical(p, frame));
  return out;
}

PointCloud decanonicalize(const PointCloud& cloud, const Box3D& frame) {
  PointCloud out;
  out.reserve(cloud.size());
  for (const auto& p : cloud) out.push_back(to_world(p, frame));
  return out;
}

SearchRegion crop_search_region(const PointCloud& cloud, const Box3D& prev_box, double margin,
                                std::size_t target_count, std::mt19937_64& rng) {
  if (!(margin >= 0.0)) throw std::invalid_argument("crop_search_region: margin must be >= 0");
  if (target_count == 0) throw std::invalid_argument("crop_search_region: target_count must be >= 1");
  const double hx = 0.5 * prev_box.l + margin;
  const double hy = 0.5 * prev_box.w + margin;
  const double hz = 0.5 * prev_box.h + margin;
  PointCloud kept;
  std::vector<std::size_t> src;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3 q = to_canonical(cloud[i], prev_box);
    if (std::abs(q.x) <= hx && std::abs(q.y) <= hy && std::abs(q.z) <= hz) {
      kept.push_back(q);
      src.push_back(i);
    }
  }
  SearchRegion out;
  if (kept.empty()) {
    out.points.assign(target_count, Vec3{});
    out.source.assign(target_count, 0);
    out.empty = true;
    return out;
  }
  std::vector<std::size_t> order(kept.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::size_t> pick;
  pick.reserve(target_count);
  if (order.size() >= target_count) {
    pick.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(target_count));
  } else {
    pick = order;
    std::uniform_int_distribution<std::size_t> dist(0, kept.size() - 1);
    while (pick.size() < target_count) pick.push_back(dist(rng));
  }
  out.points.reserve(target_count);
  out.source.reserve(target_count);
  for (std::size_t i : pick) {
    out.points.push_back(kept[i]);
    out.source.push_back(src[i]);
  }
  return out;
}

std::array<Vec3, 4> bev_corners(const Box3D& box) {
  const double hl = 0.5 * box.l;
  const double hw = 0.5 * box.w;
  const std::array<Vec3, 4> local{Vec3{hl, hw, 0}, Vec3{-hl, hw, 0}, Vec3{-hl, -hw, 0},
                                  Vec3{hl, -hw, 0}};
  std::array<Vec3, 4> out;
  for (std::size_t i = 0; i < 4; ++i) {
    out[i] = rotate_z(local[i], box.heading) + Vec3{box.center.x, box.center.y, 0.0};
  }
  return out;
}

namespace {

struct P2 {
  double x, y;
};

double cross(const P2& o, const P2& a, const P2& b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

// Sutherland-Hodgman clip of `subject` by the convex counter-clockwise `clip`.
std::vector<P2> clip_polygon(std::vector<P2> subject, const std::vector<P2>& clip) {
  for (std::size_t e = 0; e < clip.size() && !subject.empty(); ++e) {
    const P2& a = clip[e];
    const P2& b = clip[(e + 1) % clip.size()];
    std::vector<P2> input = std::move(subject);
    subject.clear();
    for (std::size_t i = 0; i < input.size(); ++i) {
      const P2& cur = input[i];
      const P2& prev = input[(i + input.size() - 1) % input.size()];
      const double dc = cross(a, b, cur);
      const double dp = cross(a, b, prev);
      const bool cur_in = dc >= 0.0;
      const bool prev_in = dp >= 0.0;
      if (cur_in != prev_in) {
        const double t = dp / (dp - dc);
        subject.push_back({prev.x + t * (cur.x - prev.x), prev.y + t * (cur.y - prev.y)});
      }
      if (cur_in) subject.push_back(cur);
    }
  }
  return subject;
}

double polygon_area(const std::vector<P2>& poly) {
  double a = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const P2& p = poly[i];
    const P2& q = poly[(i + 1) % poly.size()];
    a += p.x * q.y - q.x * p.y;
  }
  return 0.5 * std::abs(a);
}

std::vector<P2> to_poly(const Box3D& box) {
  std::vector<P2> out;
  for (const auto& c : bev_corners(box)) out.push_back({c.x, c.y});
  return out;
}

}  // namespace

double iou3d(const Box3D& a, const Box3D& b) {
  if (!(a.volume() > 0.0) || !(b.volume() > 0.0)) {
    throw std::invalid_argument("iou3d: degenerate (zero-volume) box");
  }
  const double za0 = a.center.z - 0.5 * a.h, za1 = a.center.z + 0.5 * a.h;
  const double zb0 = b.center.z - 0.5 * b.h, zb1 = b.center.z + 0.5 * b.h;
  const double dz = std::min(za1, zb1) - std::max(za0, zb0);
  if (dz <= 0.0) return 0.0;
  const double reach = 0.5 * (std::hypot(a.l, a.w) + std::hypot(b.l, b.w));
  if (std::hypot(a.center.x - b.center.x, a.center.y - b.center.y) > reach) return 0.0;
  const double area = polygon_area(clip_polygon(to_poly(a), to_poly(b)));
  const double inter = area * dz;
  const double uni = a.volume() + b.volume() - inter;
  return std::clamp(inter / uni, 0.0, 1.0);
}

}  // namespace mbp
