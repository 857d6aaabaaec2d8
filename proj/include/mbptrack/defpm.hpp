#pragma once

// Decoupled feature propagation: a geometric branch and a mask branch run
// through the same pre-norm transformer layers. Each attention's softmax map
// is computed once from geometric queries/keys and reused by the mask branch.

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "mbptrack/autodiff.hpp"
#include "mbptrack/geometry.hpp"
#include "mbptrack/nn.hpp"

namespace mbp {

struct DefpmConfig {
  std::size_t channels = 128;   // C
  std::size_t model_dim = 128;  // d
  std::size_t layers = 2;       // N_L
  std::size_t heads = 1;
  std::size_t ffn_hidden = 256;
  // Memory write FFN reads the layer output X^(l) when true, the layer input
  // X^(l-1) otherwise.
  bool write_from_output = true;
  // Reuse the geometric self-attention value projection in the mask branch.
  bool mask_self_value_shared = false;
};

// One memory slot. Coordinates are stored in the world frame so each reader
// can express them in its own canonical frame.
struct FrameEntry {
  PointCloud coords;
  std::vector<Tensor> ref_feats;  // one N x C tensor per layer
  TargetnessMask mask;
};

class MemoryBank {
 public:
  explicit MemoryBank(std::size_t capacity);

  // Appends, evicting the oldest entry once capacity is exceeded.
  void push(FrameEntry entry);
  std::size_t size() const { return entries_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return entries_.empty(); }
  const std::deque<FrameEntry>& entries() const { return entries_; }
  void set_capacity(std::size_t capacity);
  // Newest `count` entries (oldest first) with coordinates mapped into `frame`.
  std::vector<FrameEntry> view_in_frame(const Box3D& frame, std::size_t count) const;
  // Order-sensitive hash of every stored value.
  std::uint64_t fingerprint() const;

 private:
  std::size_t capacity_;
  std::deque<FrameEntry> entries_;
};

struct AttentionResult {
  ad::Var output;   // n x d
  ad::Var weights;  // n x m per head, stacked by head along rows
};

// softmax(Q K^T / sqrt(d)) V for a single head.
AttentionResult attention(const ad::Var& q, const ad::Var& k, const ad::Var& v);

enum class AttentionKind { kCross, kSelf };
enum class Branch { kGeometric, kMask };

struct AttentionEvent {
  std::size_t layer;
  AttentionKind kind;
  Branch branch;
  std::size_t head;
  const Tensor& weights;  // the exact map multiplied into this branch's values
};
using AttentionProbe = std::function<void(const AttentionEvent&)>;

struct DefpmOutput {
  ad::Var geometric;                  // X^(N_L), N x C
  ad::Var mask;                       // Y^(N_L), N x C
  std::vector<ad::Var> write_feats;   // per-layer reference features
};

class Defpm {
 public:
  Defpm(nn::ParameterStore& store, const DefpmConfig& cfg, std::mt19937_64& rng);

  // `memory` coordinates must already be in the same frame as `coords`.
  DefpmOutput forward(const ad::Var& feats, const PointCloud& coords,
                      const TargetnessMask& mask_init, std::span<const FrameEntry> memory,
                      const AttentionProbe* probe = nullptr) const;

  ad::Var positional_embed(std::size_t layer, const PointCloud& coords) const;
  const DefpmConfig& config() const { return cfg_; }
  // Names of every parameter read only by the mask branch.
  std::vector<std::string> mask_branch_parameters() const;

 private:
  struct Layer {
    nn::LayerNorm ln_query, ln_memory, ln_memory_mask;
    ad::Var cross_q, cross_k, cross_v_geo, cross_v_mask;
    nn::Linear cross_out_geo, cross_out_mask;
    nn::Linear memory_mask_proj;  // scalar -> C
    nn::LayerNorm ln_self_geo, ln_self_mask;
    ad::Var self_q, self_k, self_v_geo, self_v_mask;
    nn::Linear self_out_geo, self_out_mask;
    nn::LayerNorm ln_ffn_geo, ln_ffn_mask;
    nn::Mlp ffn_geo, ffn_mask;
    nn::Mlp pos_embed;  // 3 -> d -> d
    nn::Mlp write_ffn;  // C -> C -> C
  };

  struct Mixed {
    ad::Var geo;
    ad::Var mask;
  };
  Mixed attend(std::size_t layer, AttentionKind kind, const ad::Var& q, const ad::Var& k,
               const ad::Var& v_geo, const ad::Var& v_mask, const AttentionProbe* probe) const;

  DefpmConfig cfg_;
  nn::Linear init_mask_proj_;  // phi
  std::vector<Layer> layers_;
  std::vector<std::string> mask_param_names_;
};

}  // namespace mbp
