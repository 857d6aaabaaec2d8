#pragma once

#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "mbptrack/autodiff.hpp"
#include "mbptrack/geometry.hpp"
#include "mbptrack/nn.hpp"

namespace mbp {

struct BackboneConfig {
  std::size_t input_points = 128;          // crop size
  std::size_t num_seeds = 64;              // N
  std::size_t channels = 128;              // C
  std::vector<std::size_t> edge_widths{32, 64};  // hidden edge-conv widths; C is appended
  std::size_t edge_k = 8;
  std::size_t group_k = 8;
};

struct SeedFeatures {
  PointCloud coords;                 // N seed coordinates (input frame)
  std::vector<std::size_t> index;    // index of each seed in the input cloud
  ad::Var feats;                     // N x C
};

// Edge-convolution feature extractor over a static coordinate kNN graph,
// followed by farthest point sampling and a max-pooled grouping layer.
class Backbone {
 public:
  Backbone(nn::ParameterStore& store, const BackboneConfig& cfg, std::mt19937_64& rng);

  SeedFeatures extract(const PointCloud& cloud) const;
  const BackboneConfig& config() const { return cfg_; }

 private:
  // One edge conv: max_j relu([f_j; f_j - f_i] W + b), computed as
  // relu(max_j f_j (W1 + W2) - f_i W2 + b).
  struct EdgeLayer {
    ad::Var w_point;  // W1
    ad::Var w_diff;   // W2
    ad::Var bias;
  };
  struct GroupLayer {
    ad::Var w_feat;
    ad::Var w_offset;
    ad::Var bias;
  };

  BackboneConfig cfg_;
  std::vector<EdgeLayer> edges_;
  GroupLayer group_;
  nn::Linear project_;
};

// Seed i takes the mask value of the input point it was sampled from.
TargetnessMask downsample_mask(const TargetnessMask& full_mask, const PointCloud& cloud,
                               const SeedFeatures& seeds);

}  // namespace mbp
