#include "mbptrack/defpm.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

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

Tensor mask_column(const TargetnessMask& m) {
  Tensor t(m.size(), 1);
  for (std::size_t i = 0; i < m.size(); ++i) t[i] = m[i];
  return t;
}

std::uint64_t fnv(std::uint64_t h, const void* data, std::size_t bytes) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < bytes; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace

MemoryBank::MemoryBank(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw std::invalid_argument("MemoryBank: capacity must be >= 1");
}

void MemoryBank::push(FrameEntry entry) {
  entries_.push_back(std::move(entry));
  while (entries_.size() > capacity_) entries_.pop_front();
}

void MemoryBank::set_capacity(std::size_t capacity) {
  if (capacity == 0) throw std::invalid_argument("MemoryBank: capacity must be >= 1");
  capacity_ = capacity;
  while (entries_.size() > capacity_) entries_.pop_front();
}

std::vector<FrameEntry> MemoryBank::view_in_frame(const Box3D& frame, std::size_t count) const {
  const std::size_t take = std::min(count, entries_.size());
  std::vector<FrameEntry> out;
  out.reserve(take);
  for (std::size_t i = entries_.size() - take; i < entries_.size(); ++i) {
    FrameEntry e = entries_[i];
    e.coords = canonicalize(e.coords, frame);
    out.push_back(std::move(e));
  }
  return out;
}

std::uint64_t MemoryBank::fingerprint() const {
  std::uint64_t h = 1469598103934665603ULL;
  const std::uint64_t n = entries_.size();
  h = fnv(h, &n, sizeof n);
  for (const auto& e : entries_) {
    for (const auto& p : e.coords) h = fnv(h, &p, sizeof p);
    for (const auto& t : e.ref_feats) h = fnv(h, t.data(), t.size() * sizeof(double));
    h = fnv(h, e.mask.data(), e.mask.size() * sizeof(double));
  }
  return h;
}

AttentionResult attention(const ad::Var& q, const ad::Var& k, const ad::Var& v) {
  const std::size_t d = q.cols();
  if (d == 0) throw std::invalid_argument("attention: zero model dimension");
  if (k.cols() != d || k.rows() != v.rows()) {
    throw std::invalid_argument("attention: inconsistent Q/K/V shapes");
  }
  const ad::Var logits = ad::scale(ad::matmul_nt(q, k), 1.0 / std::sqrt(static_cast<double>(d)));
  const ad::Var weights = ad::softmax_rows(logits);
  return {ad::matmul(weights, v), weights};
}

Defpm::Defpm(nn::ParameterStore& store, const DefpmConfig& cfg, std::mt19937_64& rng)
    : cfg_(cfg) {
  const std::size_t c = cfg.channels;
  const std::size_t d = cfg.model_dim;
  if (c == 0 || d == 0 || cfg.layers == 0 || cfg.heads == 0) {
    throw std::invalid_argument("defpm: channels, model_dim, layers and heads must be positive");
  }
  if (d % cfg.heads != 0) throw std::invalid_argument("defpm: model_dim not divisible by heads");
  auto track = [&](const std::string& name) { mask_param_names_.push_back(name); };

  init_mask_proj_ = nn::Linear(store, "defpm.mask.init_proj", 1, c, rng);
  track("defpm.mask.init_proj.weight");
  track("defpm.mask.init_proj.bias");
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    const std::string p = "defpm.l" + std::to_string(l) + ".";
    const std::string pm = "defpm.l" + std::to_string(l) + ".mask.";
    Layer L;
    auto mat = [&](const std::string& name, std::size_t in, std::size_t out) {
      return store.create(name, nn::uniform_init(in, out, rng));
    };
    L.ln_query = nn::LayerNorm(store, p + "ln_query", c);
    L.ln_memory = nn::LayerNorm(store, p + "ln_memory", c);
    L.ln_memory_mask = nn::LayerNorm(store, pm + "ln_memory", c);
    L.cross_q = mat(p + "cross_q", c, d);
    L.cross_k = mat(p + "cross_k", c, d);
    L.cross_v_geo = mat(p + "cross_v", c, d);
    L.cross_v_mask = mat(pm + "cross_v", c, d);
    L.cross_out_geo = nn::Linear(store, p + "cross_out", d, c, rng);
    L.cross_out_mask = nn::Linear(store, pm + "cross_out", d, c, rng);
    L.memory_mask_proj = nn::Linear(store, pm + "memory_proj", 1, c, rng);
    L.ln_self_geo = nn::LayerNorm(store, p + "ln_self", c);
    L.ln_self_mask = nn::LayerNorm(store, pm + "ln_self", c);
    L.self_q = mat(p + "self_q", c, d);
    L.self_k = mat(p + "self_k", c, d);
    L.self_v_geo = mat(p + "self_v", c, d);
    L.self_v_mask = mat(pm + "self_v", c, d);
    L.self_out_geo = nn::Linear(store, p + "self_out", d, c, rng);
    L.self_out_mask = nn::Linear(store, pm + "self_out", d, c, rng);
    L.ln_ffn_geo = nn::LayerNorm(store, p + "ln_ffn", c);
    L.ln_ffn_mask = nn::LayerNorm(store, pm + "ln_ffn", c);
    L.ffn_geo = nn::Mlp(store, p + "ffn", {c, cfg.ffn_hidden, c}, false, rng);
    L.ffn_mask = nn::Mlp(store, pm + "ffn", {c, cfg.ffn_hidden, c}, false, rng);
    L.pos_embed = nn::Mlp(store, p + "pos_embed", {3, d, d}, false, rng);
    L.write_ffn = nn::Mlp(store, p + "write_ffn", {c, c, c}, false, rng);
    layers_.push_back(std::move(L));
  }
  for (const auto& e : store.entries())
    if (e.name.find(".mask.") != std::string::npos && e.name.rfind("defpm.l", 0) == 0)
      track(e.name);
}

std::vector<std::string> Defpm::mask_branch_parameters() const { return mask_param_names_; }

ad::Var Defpm::positional_embed(std::size_t layer, const PointCloud& coords) const {
  return layers_.at(layer).pos_embed(ad::constant(coords_tensor(coords)));
}

Defpm::Mixed Defpm::attend(std::size_t layer, AttentionKind kind, const ad::Var& q,
                           const ad::Var& k, const ad::Var& v_geo, const ad::Var& v_mask,
                           const AttentionProbe* probe) const {
  const std::size_t heads = cfg_.heads;
  const std::size_t dh = cfg_.model_dim / heads;
  if (heads == 1) {
    const AttentionResult r = attention(q, k, v_geo);
    const ad::Var mask_out = ad::matmul(r.weights, v_mask);
    if (probe && *probe) {
      (*probe)({layer, kind, Branch::kGeometric, 0, r.weights.value()});
      (*probe)({layer, kind, Branch::kMask, 0, r.weights.value()});
    }
    return {r.output, mask_out};
  }
  std::vector<ad::Var> geo_parts, mask_parts;
  for (std::size_t h = 0; h < heads; ++h) {
    const AttentionResult r = attention(ad::slice_cols(q, h * dh, dh), ad::slice_cols(k, h * dh, dh),
                                        ad::slice_cols(v_geo, h * dh, dh));
    geo_parts.push_back(r.output);
    mask_parts.push_back(ad::matmul(r.weights, ad::slice_cols(v_mask, h * dh, dh)));
    if (probe && *probe) {
      (*probe)({layer, kind, Branch::kGeometric, h, r.weights.value()});
      (*probe)({layer, kind, Branch::kMask, h, r.weights.value()});
    }
  }
  return {ad::concat_cols(geo_parts), ad::concat_cols(mask_parts)};
}

DefpmOutput Defpm::forward(const ad::Var& feats, const PointCloud& coords,
                           const TargetnessMask& mask_init, std::span<const FrameEntry> memory,
                           const AttentionProbe* probe) const {
  if (memory.empty()) throw std::invalid_argument("defpm: memory bank is empty");
  const std::size_t n = feats.rows();
  if (coords.size() != n || mask_init.size() != n || feats.cols() != cfg_.channels) {
    throw std::invalid_argument("defpm: seed features, coordinates and mask disagree in size");
  }
  for (double m : mask_init)
    if (!(m >= 0.0 && m <= 1.0)) throw std::invalid_argument("defpm: mask value outside [0,1]");

  PointCloud mem_coords;
  TargetnessMask mem_mask;
  for (const auto& e : memory) {
    if (e.ref_feats.size() != cfg_.layers) {
      throw std::invalid_argument("defpm: memory entry has " + std::to_string(e.ref_feats.size()) +
                                  " layer features, expected " + std::to_string(cfg_.layers));
    }
    mem_coords.insert(mem_coords.end(), e.coords.begin(), e.coords.end());
    mem_mask.insert(mem_mask.end(), e.mask.begin(), e.mask.end());
  }
  const ad::Var mem_mask_col = ad::constant(mask_column(mem_mask));

  ad::Var x = feats;
  ad::Var y = init_mask_proj_(ad::constant(mask_column(mask_init)));
  DefpmOutput out;
  for (std::size_t l = 0; l < cfg_.layers; ++l) {
    const Layer& L = layers_[l];
    std::vector<ad::Var> mem_vars;
    for (const auto& e : memory) mem_vars.push_back(ad::constant(e.ref_feats[l]));
    const ad::Var x_mem = mem_vars.size() == 1 ? mem_vars[0] : ad::concat_rows(mem_vars);
    if (x_mem.rows() != mem_coords.size() || x_mem.cols() != cfg_.channels) {
      throw std::invalid_argument("defpm: memory features do not match memory coordinates");
    }
    const ad::Var pos_cur = L.pos_embed(ad::constant(coords_tensor(coords)));
    const ad::Var pos_mem = L.pos_embed(ad::constant(coords_tensor(mem_coords)));

    // Cross-attention from memory.
    const ad::Var xq = L.ln_query(x);
    const ad::Var xm = L.ln_memory(x_mem);
    const ad::Var ym = L.ln_memory_mask(L.memory_mask_proj(mem_mask_col));
    const Mixed cross =
        attend(l, AttentionKind::kCross, ad::add(ad::matmul(xq, L.cross_q), pos_cur),
               ad::add(ad::matmul(xm, L.cross_k), pos_mem), ad::matmul(xm, L.cross_v_geo),
               ad::matmul(ym, L.cross_v_mask), probe);
    const ad::Var x_cross = ad::add(x, L.cross_out_geo(cross.geo));
    const ad::Var y_cross = ad::add(y, L.cross_out_mask(cross.mask));

    // Self-attention within the current frame.
    const ad::Var xs = L.ln_self_geo(x_cross);
    const ad::Var ys = L.ln_self_mask(y_cross);
    const ad::Var& v_mask_w = cfg_.mask_self_value_shared ? L.self_v_geo : L.self_v_mask;
    const Mixed self =
        attend(l, AttentionKind::kSelf, ad::add(ad::matmul(xs, L.self_q), pos_cur),
               ad::add(ad::matmul(xs, L.self_k), pos_cur), ad::matmul(xs, L.self_v_geo),
               ad::matmul(ys, v_mask_w), probe);
    const ad::Var x_self = ad::add(x_cross, L.self_out_geo(self.geo));
    const ad::Var y_self = ad::add(y_cross, L.self_out_mask(self.mask));

    const ad::Var x_next = ad::add(x_self, L.ffn_geo(L.ln_ffn_geo(x_self)));
    const ad::Var y_next = ad::add(y_self, L.ffn_mask(L.ln_ffn_mask(y_self)));

    out.write_feats.push_back(L.write_ffn(cfg_.write_from_output ? x_next : x));
    x = x_next;
    y = y_next;
  }
  out.geometric = x;
  out.mask = y;
  return out;
}

}  // namespace mbp
