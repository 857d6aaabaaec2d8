#pragma once

#include <cstdint>
#include <optional>
#include <span>

#include "mbptrack/backbone.hpp"
#include "mbptrack/bploc.hpp"
#include "mbptrack/defpm.hpp"
#include "mbptrack/nn.hpp"

namespace mbp {

struct ModelConfig {
  BackboneConfig backbone;
  DefpmConfig defpm;
  BplocConfig bploc;
  std::uint64_t init_seed = 0;

  // Propagates the shared channel width C to every sub-config.
  void set_channels(std::size_t c);
  void validate() const;
};

// Everything one frame produces on its way through the network.
struct FrameForward {
  SeedFeatures seeds;
  DefpmOutput defpm;
  ad::Var fused;  // X + Y
  VoteOutput vote;
  ProposalSet proposals;
};

class MbpNetwork {
 public:
  explicit MbpNetwork(const ModelConfig& cfg);
  MbpNetwork(const MbpNetwork&) = delete;
  MbpNetwork& operator=(const MbpNetwork&) = delete;

  // `crop` is canonical; `memory` coordinates must be in the same frame.
  // Without `seed_mask` the current-frame mask is initialised to 0.5.
  FrameForward forward(const PointCloud& crop, std::span<const FrameEntry> memory,
                       const Vec3& grid_extent,
                       const std::optional<TargetnessMask>& seed_mask = std::nullopt,
                       const Bploc::OverrideFn& overrides = {},
                       const AttentionProbe* probe = nullptr) const;

  // First-frame entry: propagate the frame against a raw copy of itself (ground
  // truth mask, backbone features in every layer slot), then store the write
  // features. `frame` maps the canonical crop back to the world.
  FrameEntry bootstrap_entry(const PointCloud& crop, const TargetnessMask& full_mask,
                             const Box3D& frame) const;

  // Detached memory entry from a forward pass.
  static FrameEntry make_entry(const FrameForward& fwd, const TargetnessMask& mask,
                               const Box3D& frame);

  const ModelConfig& config() const { return cfg_; }
  nn::ParameterStore& params() { return store_; }
  const nn::ParameterStore& params() const { return store_; }
  const Backbone& backbone() const { return backbone_; }
  const Defpm& defpm() const { return defpm_; }
  const Bploc& bploc() const { return bploc_; }

 private:
  ModelConfig cfg_;
  nn::ParameterStore store_;
  std::mt19937_64 init_rng_;
  Backbone backbone_;
  Defpm defpm_;
  Bploc bploc_;
};

}  // namespace mbp
