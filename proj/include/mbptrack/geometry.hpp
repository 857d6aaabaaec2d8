#pragma once

#include <array>
#include <cstddef>
#include <random>
#include <vector>

namespace mbp {

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  bool operator==(const Vec3&) const = default;
  double norm() const;
  double squared_norm() const { return x * x + y * y + z * z; }
};

using PointCloud = std::vector<Vec3>;
// Per-point probability of belonging to the target, each in [0, 1].
using TargetnessMask = std::vector<double>;

// Heading-aligned canonical frame: length l along +x, width w along +y,
// height h along +z; heading is the yaw of the length axis about +z.
struct Box3D {
  Vec3 center;
  double w = 1.0;
  double l = 1.0;
  double h = 1.0;
  double heading = 0.0;

  // Validates positive size and finite values; normalizes the heading.
  static Box3D make(Vec3 center, double w, double l, double h, double heading);
  double volume() const { return w * l * h; }
  bool operator==(const Box3D&) const = default;
};

struct Motion4DOF {
  double dx = 0.0;
  double dy = 0.0;
  double dz = 0.0;
  double dtheta = 0.0;
};

// Maps an angle into (-pi, pi].
double normalize_angle(double a);

Vec3 rotate_z(const Vec3& p, double angle);
Vec3 to_canonical(const Vec3& p, const Box3D& frame);
Vec3 to_world(const Vec3& p, const Box3D& frame);

// Binary mask, 1 for points inside or on the boundary of the box.
TargetnessMask points_in_box(const PointCloud& cloud, const Box3D& box);
bool point_in_box(const Vec3& p, const Box3D& box);

// Translation is expressed in the previous box's canonical frame.
Box3D apply_motion(const Box3D& box, const Motion4DOF& motion);

// Motion that takes `from` onto `to` (inverse of apply_motion, size ignored).
Motion4DOF relative_motion(const Box3D& from, const Box3D& to);

PointCloud canonicalize(const PointCloud& cloud, const Box3D& frame);
PointCloud decanonicalize(const PointCloud& cloud, const Box3D& frame);

struct SearchRegion {
  PointCloud points;                 // canonical frame of the reference box
  std::vector<std::size_t> source;   // index into the input cloud per point
  bool empty = false;
};

// Keeps points inside `prev_box` grown by `margin` on w and l and 2*margin on
// h, canonicalizes them and resamples to exactly `target_count` points.
SearchRegion crop_search_region(const PointCloud& cloud, const Box3D& prev_box,
                                double margin, std::size_t target_count,
                                std::mt19937_64& rng);

std::array<Vec3, 4> bev_corners(const Box3D& box);

// Exact oriented-box IoU (polygon clipping in bird's-eye view times vertical
// overlap). Throws std::invalid_argument for zero-volume boxes.
double iou3d(const Box3D& a, const Box3D& b);

}  // namespace mbp
