#pragma once

// Box-prior localization: Hough voting for coarse centers, farthest point
// proposal sampling, a reference grid per proposal sized by the first-frame
// box, point-to-reference edge aggregation into dense 3-D maps, and a shared
// 3-D CNN that refines each proposal.

#include <array>
#include <cstddef>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "mbptrack/autodiff.hpp"
#include "mbptrack/geometry.hpp"
#include "mbptrack/nn.hpp"

namespace mbp {

struct GridDims {
  std::size_t nx = 4;
  std::size_t ny = 4;
  std::size_t nz = 4;
  std::size_t cells() const { return nx * ny * nz; }
};

struct BplocConfig {
  std::size_t channels = 128;
  std::size_t proposals = 16;  // N_p
  GridDims grid;
  std::size_t k = 8;
  std::size_t conv_layers = 2;
};

struct VoteOutput {
  ad::Var centers;         // N x 3, seed coordinate + offset
  ad::Var mask_logits;     // N x 1
  ad::Var quality_logits;  // N x 1

  TargetnessMask mask() const;
  std::vector<double> quality() const;
};

struct ProposalSet {
  std::vector<std::size_t> source;  // seed index per proposal
  ad::Var centers;                  // N_p x 3
  ad::Var dense_maps;               // (N_p * cells) x C, lexicographic (i, j, k) per proposal
  ad::Var box_params;               // N_p x 4: translation residual, dtheta
  ad::Var score_logits;             // N_p x 1

  std::vector<double> scores() const;
  std::size_t size() const { return source.size(); }
};

// Offsets s_ijk for i in [1,nx], j in [1,ny], k in [1,nz], lexicographic
// order, axis-aligned in the canonical frame. `extent` holds the box extent
// along canonical x, y and z.
PointCloud box_prior_offsets(const Vec3& extent, const GridDims& dims);
PointCloud box_prior_reference_points(const Vec3& center, const Vec3& extent,
                                      const GridDims& dims);
// Canonical-frame extents (x, y, z) = (l, w, h) of a box.
Vec3 grid_extent(const Box3D& box);

// FPS over voted centers starting from the one nearest the canonical origin.
std::vector<std::size_t> sample_proposals(const Tensor& centers, std::size_t n);

struct DenseMap {
  GridDims dims;
  std::size_t channels = 0;
  std::vector<double> data;  // nx * ny * nz * C
  double at(std::size_t i, std::size_t j, std::size_t k, std::size_t c) const {
    return data[((i * dims.ny + j) * dims.nz + k) * channels + c];
  }
};
DenseMap assemble_dense_map(const Tensor& ref_feats, const GridDims& dims);
Tensor flatten_dense_map(const DenseMap& map);

// im2col table for a 3x3x3 stride-1 zero-padded convolution over `count`
// stacked grids; rows = count * cells, 27 columns, -1 for padding.
std::vector<std::ptrdiff_t> conv3d_index(const GridDims& dims, std::size_t count);

struct RefineOutput {
  ad::Var box_params;    // N_p x 4
  ad::Var score_logits;  // N_p x 1
};

class Bploc {
 public:
  Bploc(nn::ParameterStore& store, const BplocConfig& cfg, std::mt19937_64& rng);

  VoteOutput vote(const ad::Var& fused, const PointCloud& coords) const;

  // f_r = max over the k nearest seeds j of e([h([f_j; m_j]); x_j - r; r]).
  ad::Var point_to_reference(const ad::Var& feats, const ad::Var& mask_prob,
                             const PointCloud& coords, const ad::Var& refs, std::size_t k) const;

  RefineOutput refine(const ad::Var& dense, std::size_t proposals,
                      const ad::Var& quality_at_proposals) const;

  // Replacement rows for positive sampling are given as (row, center) pairs.
  struct CenterOverride {
    std::size_t row;
    Vec3 center;
  };

  // Given the sampled proposal centers, returns rows to replace.
  using OverrideFn = std::function<std::vector<CenterOverride>(const PointCloud&)>;

  // Full head: proposals, reference grids, dense maps and refinement.
  ProposalSet propose(const ad::Var& fused, const PointCloud& coords, const VoteOutput& votes,
                      const Vec3& extent, const OverrideFn& overrides = {}) const;

  const BplocConfig& config() const { return cfg_; }

  // Parameters of e() split by input block, exposed for reference checks.
  struct EdgeParams {
    ad::Var w_feat, w_offset, w_ref, bias;
  };
  const nn::Mlp& feature_mlp() const { return point_mlp_; }
  const EdgeParams& edge_params() const { return edge_; }
  const nn::Mlp& head_mlp() const { return head_; }
  const nn::Mlp& vote_mlp() const { return vote_mlp_; }

 private:
  BplocConfig cfg_;
  nn::Mlp vote_mlp_;   // C -> C -> 5
  nn::Mlp point_mlp_;  // h: C+1 -> C
  EdgeParams edge_;
  std::vector<nn::Linear> conv_;  // each 27C -> C
  nn::Mlp head_;                  // C+1 -> C -> 5
};

// argmax score (lowest index on ties); translation = proposal center +
// residual, heading change = dtheta, all in the canonical frame.
Motion4DOF select_best(const ProposalSet& proposals);
Motion4DOF select_best(const Tensor& centers, const Tensor& box_params,
                       std::span<const double> scores);

}  // namespace mbp
