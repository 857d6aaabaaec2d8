#include "mbptrack/model.hpp"

#include <stdexcept>
#include <string>

namespace mbp {

void ModelConfig::set_channels(std::size_t c) {
  backbone.channels = c;
  defpm.channels = c;
  defpm.model_dim = c;
  defpm.ffn_hidden = 2 * c;
  bploc.channels = c;
}

void ModelConfig::validate() const {
  if (backbone.channels != defpm.channels || defpm.channels != bploc.channels) {
    throw std::invalid_argument("model: channel width must agree across backbone, defpm, bploc");
  }
  if (backbone.num_seeds > backbone.input_points) {
    throw std::invalid_argument("model: num_seeds exceeds crop size");
  }
  if (bploc.proposals > backbone.num_seeds) {
    throw std::invalid_argument("model: proposals exceed seed count");
  }
  if (bploc.k > backbone.num_seeds) {
    throw std::invalid_argument("model: reference k exceeds seed count");
  }
}

MbpNetwork::MbpNetwork(const ModelConfig& cfg)
    : cfg_((cfg.validate(), cfg)),
      init_rng_(cfg.init_seed),
      backbone_(store_, cfg.backbone, init_rng_),
      defpm_(store_, cfg.defpm, init_rng_),
      bploc_(store_, cfg.bploc, init_rng_) {}

FrameForward MbpNetwork::forward(const PointCloud& crop, std::span<const FrameEntry> memory,
                                 const Vec3& extent,
                                 const std::optional<TargetnessMask>& seed_mask,
                                 const Bploc::OverrideFn& overrides,
                                 const AttentionProbe* probe) const {
  FrameForward f;
  f.seeds = backbone_.extract(crop);
  const TargetnessMask init = seed_mask ? *seed_mask : TargetnessMask(f.seeds.coords.size(), 0.5);
  f.defpm = defpm_.forward(f.seeds.feats, f.seeds.coords, init, memory, probe);
  f.fused = ad::add(f.defpm.geometric, f.defpm.mask);
  f.vote = bploc_.vote(f.fused, f.seeds.coords);
  f.proposals = bploc_.propose(f.fused, f.seeds.coords, f.vote, extent, overrides);
  return f;
}

FrameEntry MbpNetwork::make_entry(const FrameForward& fwd, const TargetnessMask& mask,
                                  const Box3D& frame) {
  FrameEntry e;
  e.coords = decanonicalize(fwd.seeds.coords, frame);
  for (const auto& w : fwd.defpm.write_feats) e.ref_feats.push_back(w.value());
  e.mask = mask;
  return e;
}

FrameEntry MbpNetwork::bootstrap_entry(const PointCloud& crop, const TargetnessMask& full_mask,
                                       const Box3D& frame) const {
  const SeedFeatures seeds = backbone_.extract(crop);
  const TargetnessMask seed_mask = downsample_mask(full_mask, crop, seeds);
  FrameEntry raw;
  raw.coords = seeds.coords;
  raw.ref_feats.assign(cfg_.defpm.layers, seeds.feats.value());
  raw.mask = seed_mask;
  const DefpmOutput out =
      defpm_.forward(seeds.feats, seeds.coords, seed_mask, std::span<const FrameEntry>(&raw, 1));
  FrameEntry e;
  e.coords = decanonicalize(seeds.coords, frame);
  for (const auto& w : out.write_feats) e.ref_feats.push_back(w.value());
  e.mask = seed_mask;
  return e;
}

}  // namespace mbp
