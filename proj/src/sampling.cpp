#include "mbptrack/sampling.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>
#include <string>

namespace mbp {

std::vector<std::size_t> farthest_point_sample(const PointCloud& points, std::size_t count,
                                               std::size_t start) {
  if (count > points.size()) {
    throw std::invalid_argument("farthest_point_sample: requested " + std::to_string(count) +
                                " of " + std::to_string(points.size()) + " points");
  }
  std::vector<std::size_t> out;
  if (count == 0) return out;
  if (start >= points.size()) throw std::out_of_range("farthest_point_sample: bad start index");
  out.reserve(count);
  std::vector<double> dist(points.size(), std::numeric_limits<double>::infinity());
  std::size_t cur = start;
  for (std::size_t s = 0; s < count; ++s) {
    out.push_back(cur);
    dist[cur] = -1.0;
    std::size_t best = 0;
    double best_d = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (dist[i] < 0.0) continue;
      dist[i] = std::min(dist[i], (points[i] - points[cur]).squared_norm());
      if (dist[i] > best_d) {
        best_d = dist[i];
        best = i;
      }
    }
    cur = best;
  }
  return out;
}

std::size_t nearest_to_origin(const PointCloud& points) {
  if (points.empty()) throw std::invalid_argument("nearest_to_origin: empty cloud");
  std::size_t best = 0;
  for (std::size_t i = 1; i < points.size(); ++i)
    if (points[i].squared_norm() < points[best].squared_norm()) best = i;
  return best;
}

std::vector<std::size_t> knn(const PointCloud& points, const PointCloud& queries, std::size_t k) {
  if (k == 0 || k > points.size()) {
    throw std::invalid_argument("knn: k=" + std::to_string(k) + " with " +
                                std::to_string(points.size()) + " points");
  }
  std::vector<std::size_t> out(queries.size() * k);
  std::vector<std::pair<double, std::size_t>> cand(points.size());
  for (std::size_t q = 0; q < queries.size(); ++q) {
    for (std::size_t i = 0; i < points.size(); ++i)
      cand[i] = {(points[i] - queries[q]).squared_norm(), i};
    std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(k), cand.end());
    for (std::size_t j = 0; j < k; ++j) out[q * k + j] = cand[j].second;
  }
  return out;
}

}  // namespace mbp
