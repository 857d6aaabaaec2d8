#include "mbptrack/backbone.hpp"

#include <stdexcept>
#include <string>

#include "mbptrack/sampling.hpp"

namespace mbp {
namespace {

Tensor coords_tensor(const PointCloud& pts) {
  Tensor t(pts.size(), 3);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    t(i, 0) = pts[i].x;
    t(i, 1) = pts[i].y;
    t(i, 2) = pts[i].z;
  }
  return t;
}

}  // namespace

Backbone::Backbone(nn::ParameterStore& store, const BackboneConfig& cfg, std::mt19937_64& rng)
    : cfg_(cfg) {
  if (cfg.num_seeds == 0 || cfg.channels == 0) {
    throw std::invalid_argument("backbone: num_seeds and channels must be positive");
  }
  if (cfg.num_seeds > cfg.input_points) {
    throw std::invalid_argument("backbone: num_seeds exceeds input_points");
  }
  std::vector<std::size_t> widths{3};
  widths.insert(widths.end(), cfg.edge_widths.begin(), cfg.edge_widths.end());
  widths.push_back(cfg.channels);
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const std::string name = "backbone.edge" + std::to_string(l);
    const std::size_t in = widths[l];
    const std::size_t out = widths[l + 1];
    EdgeLayer layer;
    // Fan-in of the concatenated edge feature is 2 * in.
    Tensor w = nn::uniform_init(2 * in, out, rng);
    Tensor w1(in, out), w2(in, out);
    for (std::size_t r = 0; r < in; ++r)
      for (std::size_t c = 0; c < out; ++c) {
        w1(r, c) = w(r, c);
        w2(r, c) = w(in + r, c);
      }
    layer.w_point = store.create(name + ".w_point", std::move(w1));
    layer.w_diff = store.create(name + ".w_diff", std::move(w2));
    layer.bias = store.create(name + ".bias", Tensor(1, out));
    edges_.push_back(std::move(layer));
  }
  const std::size_t c = cfg.channels;
  Tensor wg = nn::uniform_init(c + 3, c, rng);
  Tensor wf(c, c), wo(3, c);
  for (std::size_t r = 0; r < c; ++r)
    for (std::size_t j = 0; j < c; ++j) wf(r, j) = wg(r, j);
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t j = 0; j < c; ++j) wo(r, j) = wg(c + r, j);
  group_.w_feat = store.create("backbone.group.w_feat", std::move(wf));
  group_.w_offset = store.create("backbone.group.w_offset", std::move(wo));
  group_.bias = store.create("backbone.group.bias", Tensor(1, c));
  project_ = nn::Linear(store, "backbone.project", c, c, rng);
}

SeedFeatures Backbone::extract(const PointCloud& cloud) const {
  if (cloud.size() < cfg_.num_seeds) {
    throw std::invalid_argument("backbone: cloud has " + std::to_string(cloud.size()) +
                                " points, fewer than num_seeds=" +
                                std::to_string(cfg_.num_seeds));
  }
  const std::size_t n = cloud.size();
  const std::size_t k = std::min(cfg_.edge_k, n);
  const auto nbr = knn(cloud, cloud, k);
  const ad::Var xyz = ad::constant(coords_tensor(cloud));

  ad::Var f = xyz;
  for (const auto& layer : edges_) {
    const ad::Var a = ad::matmul(f, ad::add(layer.w_point, layer.w_diff));
    const ad::Var b = ad::matmul(f, layer.w_diff);
    const ad::Var pooled = ad::group_max(ad::gather_rows(a, nbr), k);
    f = ad::relu(ad::add_row(ad::sub(pooled, b), layer.bias));
  }

  SeedFeatures seeds;
  seeds.index = farthest_point_sample(cloud, cfg_.num_seeds, nearest_to_origin(cloud));
  seeds.coords.reserve(seeds.index.size());
  for (std::size_t i : seeds.index) seeds.coords.push_back(cloud[i]);

  // relu(max_j f_j Wf + (x_j - s) Wo + b) over the group_k nearest points.
  const std::size_t gk = std::min(cfg_.group_k, n);
  const auto gnbr = knn(cloud, seeds.coords, gk);
  const ad::Var a = ad::add(ad::matmul(f, group_.w_feat), ad::matmul(xyz, group_.w_offset));
  const ad::Var pooled = ad::group_max(ad::gather_rows(a, gnbr), gk);
  const ad::Var s = ad::matmul(ad::constant(coords_tensor(seeds.coords)), group_.w_offset);
  const ad::Var grouped = ad::relu(ad::add_row(ad::sub(pooled, s), group_.bias));
  seeds.feats = project_(grouped);
  return seeds;
}

TargetnessMask downsample_mask(const TargetnessMask& full_mask, const PointCloud& cloud,
                               const SeedFeatures& seeds) {
  if (full_mask.size() != cloud.size()) {
    throw std::invalid_argument("downsample_mask: mask length does not match cloud");
  }
  TargetnessMask out;
  out.reserve(seeds.index.size());
  for (std::size_t i : seeds.index) {
    if (i >= full_mask.size()) throw std::out_of_range("downsample_mask: seed index out of range");
    out.push_back(full_mask[i]);
  }
  return out;
}

}  // namespace mbp
