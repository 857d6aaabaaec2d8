#pragma once

#include <cstddef>
#include <vector>

#include "mbptrack/geometry.hpp"

namespace mbp {

// Greedy max-min subset of `count` indices starting at `start`; ties go to the
// lowest index. Throws when count > points.size().
std::vector<std::size_t> farthest_point_sample(const PointCloud& points, std::size_t count,
                                               std::size_t start);

// Index of the point nearest the origin (lowest index on ties).
std::size_t nearest_to_origin(const PointCloud& points);

// k nearest `points` for each query, sorted by distance then index; row-major
// queries.size() x k. Requires k <= points.size().
std::vector<std::size_t> knn(const PointCloud& points, const PointCloud& queries, std::size_t k);

}  // namespace mbp
