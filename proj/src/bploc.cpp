#include "mbptrack/bploc.hpp"

#include <cmath>
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

PointCloud cloud_from(const Tensor& t) {
  PointCloud out(t.rows());
  for (std::size_t i = 0; i < t.rows(); ++i) out[i] = {t(i, 0), t(i, 1), t(i, 2)};
  return out;
}

std::vector<double> sigmoid_values(const Tensor& logits) {
  std::vector<double> out(logits.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = 1.0 / (1.0 + std::exp(-logits[i]));
  return out;
}

double axis_offset(std::size_t idx1, std::size_t n, double extent) {
  // (2i - n - 1) / (2n) * extent with 1-based i.
  return (2.0 * static_cast<double>(idx1) - static_cast<double>(n) - 1.0) /
         (2.0 * static_cast<double>(n)) * extent;
}

}  // namespace

TargetnessMask VoteOutput::mask() const { return sigmoid_values(mask_logits.value()); }
std::vector<double> VoteOutput::quality() const { return sigmoid_values(quality_logits.value()); }
std::vector<double> ProposalSet::scores() const { return sigmoid_values(score_logits.value()); }

PointCloud box_prior_offsets(const Vec3& extent, const GridDims& dims) {
  if (dims.nx == 0 || dims.ny == 0 || dims.nz == 0) {
    throw std::invalid_argument("box prior: grid counts must be >= 1");
  }
  if (!(extent.x > 0.0 && extent.y > 0.0 && extent.z > 0.0)) {
    throw std::invalid_argument("box prior: extents must be positive");
  }
  PointCloud out;
  out.reserve(dims.cells());
  for (std::size_t i = 1; i <= dims.nx; ++i)
    for (std::size_t j = 1; j <= dims.ny; ++j)
      for (std::size_t k = 1; k <= dims.nz; ++k)
        out.push_back({axis_offset(i, dims.nx, extent.x), axis_offset(j, dims.ny, extent.y),
                       axis_offset(k, dims.nz, extent.z)});
  return out;
}

PointCloud box_prior_reference_points(const Vec3& center, const Vec3& extent,
                                      const GridDims& dims) {
  PointCloud out = box_prior_offsets(extent, dims);
  for (auto& p : out) p = center + p;
  return out;
}

Vec3 grid_extent(const Box3D& box) { return {box.l, box.w, box.h}; }

std::vector<std::size_t> sample_proposals(const Tensor& centers, std::size_t n) {
  if (centers.cols() != 3) throw std::invalid_argument("sample_proposals: centers must be N x 3");
  if (n > centers.rows()) {
    throw std::invalid_argument("sample_proposals: requested " + std::to_string(n) +
                                " proposals from " + std::to_string(centers.rows()) + " centers");
  }
  const PointCloud pts = cloud_from(centers);
  if (n == 0) return {};
  return farthest_point_sample(pts, n, nearest_to_origin(pts));
}

DenseMap assemble_dense_map(const Tensor& ref_feats, const GridDims& dims) {
  if (ref_feats.rows() != dims.cells()) {
    throw std::invalid_argument("assemble_dense_map: " + std::to_string(ref_feats.rows()) +
                                " reference rows for a grid of " +
                                std::to_string(dims.cells()) + " cells");
  }
  return DenseMap{dims, ref_feats.cols(), ref_feats.storage()};
}

Tensor flatten_dense_map(const DenseMap& map) {
  return Tensor(map.dims.cells(), map.channels, map.data);
}

std::vector<std::ptrdiff_t> conv3d_index(const GridDims& dims, std::size_t count) {
  const std::size_t cells = dims.cells();
  std::vector<std::ptrdiff_t> idx(count * cells * 27, -1);
  const auto nx = static_cast<std::ptrdiff_t>(dims.nx);
  const auto ny = static_cast<std::ptrdiff_t>(dims.ny);
  const auto nz = static_cast<std::ptrdiff_t>(dims.nz);
  for (std::size_t p = 0; p < count; ++p) {
    const auto base = static_cast<std::ptrdiff_t>(p * cells);
    for (std::ptrdiff_t i = 0; i < nx; ++i)
      for (std::ptrdiff_t j = 0; j < ny; ++j)
        for (std::ptrdiff_t k = 0; k < nz; ++k) {
          const std::size_t row = p * cells + static_cast<std::size_t>((i * ny + j) * nz + k);
          std::size_t q = 0;
          for (std::ptrdiff_t di = -1; di <= 1; ++di)
            for (std::ptrdiff_t dj = -1; dj <= 1; ++dj)
              for (std::ptrdiff_t dk = -1; dk <= 1; ++dk, ++q) {
                const std::ptrdiff_t a = i + di, b = j + dj, c = k + dk;
                if (a < 0 || a >= nx || b < 0 || b >= ny || c < 0 || c >= nz) continue;
                idx[row * 27 + q] = base + (a * ny + b) * nz + c;
              }
        }
  }
  return idx;
}

Bploc::Bploc(nn::ParameterStore& store, const BplocConfig& cfg, std::mt19937_64& rng)
    : cfg_(cfg) {
  const std::size_t c = cfg.channels;
  if (c == 0 || cfg.proposals == 0 || cfg.k == 0) {
    throw std::invalid_argument("bploc: channels, proposals and k must be positive");
  }
  vote_mlp_ = nn::Mlp(store, "bploc.vote", {c, c, 5}, false, rng);
  point_mlp_ = nn::Mlp(store, "bploc.point", {c + 1, c}, true, rng);
  Tensor w = nn::uniform_init(c + 6, c, rng);
  Tensor wf(c, c), wo(3, c), wr(3, c);
  for (std::size_t j = 0; j < c; ++j) {
    for (std::size_t r = 0; r < c; ++r) wf(r, j) = w(r, j);
    for (std::size_t r = 0; r < 3; ++r) {
      wo(r, j) = w(c + r, j);
      wr(r, j) = w(c + 3 + r, j);
    }
  }
  edge_.w_feat = store.create("bploc.edge.w_feat", std::move(wf));
  edge_.w_offset = store.create("bploc.edge.w_offset", std::move(wo));
  edge_.w_ref = store.create("bploc.edge.w_ref", std::move(wr));
  edge_.bias = store.create("bploc.edge.bias", Tensor(1, c));
  for (std::size_t l = 0; l < cfg.conv_layers; ++l)
    conv_.emplace_back(store, "bploc.conv" + std::to_string(l), 27 * c, c, rng);
  head_ = nn::Mlp(store, "bploc.head", {c + 1, c, 5}, false, rng);
}

VoteOutput Bploc::vote(const ad::Var& fused, const PointCloud& coords) const {
  if (fused.rows() != coords.size()) {
    throw std::invalid_argument("vote: feature rows do not match coordinates");
  }
  const ad::Var out = vote_mlp_(fused);
  VoteOutput v;
  v.centers = ad::add(ad::constant(coords_tensor(coords)), ad::slice_cols(out, 0, 3));
  v.mask_logits = ad::slice_cols(out, 3, 1);
  v.quality_logits = ad::slice_cols(out, 4, 1);
  return v;
}

ad::Var Bploc::point_to_reference(const ad::Var& feats, const ad::Var& mask_prob,
                                  const PointCloud& coords, const ad::Var& refs,
                                  std::size_t k) const {
  if (k == 0 || k > coords.size()) {
    throw std::invalid_argument("point_to_reference: k=" + std::to_string(k) + " with " +
                                std::to_string(coords.size()) + " seeds");
  }
  const ad::Var fm[] = {feats, mask_prob};
  const ad::Var fhat = point_mlp_(ad::concat_cols(fm));
  // e([f; x - r; r]) = f Wf + x Wo + r (Wr - Wo) + b; the r term is constant
  // over a reference's neighbourhood so it moves outside the max.
  const ad::Var per_seed =
      ad::add(ad::matmul(fhat, edge_.w_feat),
              ad::matmul(ad::constant(coords_tensor(coords)), edge_.w_offset));
  const auto nbr = knn(coords, cloud_from(refs.value()), k);
  const ad::Var pooled = ad::group_max(ad::gather_rows(per_seed, nbr), k);
  const ad::Var per_ref = ad::matmul(refs, ad::sub(edge_.w_ref, edge_.w_offset));
  return ad::relu(ad::add_row(ad::add(pooled, per_ref), edge_.bias));
}

RefineOutput Bploc::refine(const ad::Var& dense, std::size_t proposals,
                           const ad::Var& quality_at_proposals) const {
  const std::size_t cells = cfg_.grid.cells();
  if (dense.rows() != proposals * cells) {
    throw std::invalid_argument("refine: dense map rows do not match proposals x cells");
  }
  if (quality_at_proposals.rows() != proposals || quality_at_proposals.cols() != 1) {
    throw std::invalid_argument("refine: quality must be N_p x 1");
  }
  const auto idx = conv3d_index(cfg_.grid, proposals);
  ad::Var h = dense;
  for (const auto& conv : conv_) h = ad::relu(conv(ad::gather_blocks(h, idx, 27)));
  const ad::Var pooled = ad::group_max(h, cells);
  const ad::Var parts[] = {pooled, quality_at_proposals};
  const ad::Var out = head_(ad::concat_cols(parts));
  return {ad::slice_cols(out, 0, 4), ad::slice_cols(out, 4, 1)};
}

ProposalSet Bploc::propose(const ad::Var& fused, const PointCloud& coords,
                           const VoteOutput& votes, const Vec3& extent,
                           const OverrideFn& override_fn) const {
  const std::size_t n = std::min(cfg_.proposals, coords.size());
  ProposalSet ps;
  ps.source = sample_proposals(votes.centers.value(), n);
  ad::Var centers = ad::gather_rows(votes.centers, ps.source);
  const std::vector<CenterOverride> overrides =
      override_fn ? override_fn(cloud_from(centers.value())) : std::vector<CenterOverride>{};
  if (!overrides.empty()) {
    Tensor keep(n, 3, 1.0), repl(n, 3, 0.0);
    for (const auto& o : overrides) {
      if (o.row >= n) throw std::out_of_range("propose: override row out of range");
      for (std::size_t c = 0; c < 3; ++c) keep(o.row, c) = 0.0;
      repl(o.row, 0) = o.center.x;
      repl(o.row, 1) = o.center.y;
      repl(o.row, 2) = o.center.z;
    }
    centers = ad::add(ad::mul(centers, ad::constant(std::move(keep))), ad::constant(std::move(repl)));
  }
  ps.centers = centers;

  const GridDims& g = cfg_.grid;
  const PointCloud offsets = box_prior_offsets(extent, g);
  std::vector<std::size_t> rep(n * g.cells());
  Tensor off(n * g.cells(), 3);
  for (std::size_t p = 0; p < n; ++p)
    for (std::size_t c = 0; c < g.cells(); ++c) {
      const std::size_t r = p * g.cells() + c;
      rep[r] = p;
      off(r, 0) = offsets[c].x;
      off(r, 1) = offsets[c].y;
      off(r, 2) = offsets[c].z;
    }
  const ad::Var refs = ad::add(ad::gather_rows(centers, rep), ad::constant(std::move(off)));
  const ad::Var mask_prob = ad::sigmoid(votes.mask_logits);
  const std::size_t k = std::min(cfg_.k, coords.size());
  ps.dense_maps = point_to_reference(fused, mask_prob, coords, refs, k);
  const ad::Var quality = ad::gather_rows(ad::sigmoid(votes.quality_logits), ps.source);
  RefineOutput r = refine(ps.dense_maps, n, quality);
  ps.box_params = r.box_params;
  ps.score_logits = r.score_logits;
  return ps;
}

Motion4DOF select_best(const Tensor& centers, const Tensor& box_params,
                       std::span<const double> scores) {
  if (scores.empty()) throw std::invalid_argument("select_best: no proposals");
  if (centers.rows() != scores.size() || box_params.rows() != scores.size()) {
    throw std::invalid_argument("select_best: proposal arrays disagree in length");
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i)
    if (scores[i] > scores[best]) best = i;
  return {centers(best, 0) + box_params(best, 0), centers(best, 1) + box_params(best, 1),
          centers(best, 2) + box_params(best, 2), normalize_angle(box_params(best, 3))};
}

Motion4DOF select_best(const ProposalSet& proposals) {
  // Logits order proposals exactly like the sigmoid scores without saturating.
  const auto& logits = proposals.score_logits.value().storage();
  return select_best(proposals.centers.value(), proposals.box_params.value(), logits);
}

}  // namespace mbp
