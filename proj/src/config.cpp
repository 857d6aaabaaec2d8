#include "mbptrack/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <variant>

namespace mbp {
namespace {

static_assert(std::is_same_v<std::size_t, std::uint64_t>, "seeds share the count field type");

using Field = std::variant<std::size_t*, double*, bool*, std::string*,
                           ObjectTemplate*, std::vector<std::size_t>*>;

struct Key {
  const char* name;
  std::function<Field(RunConfig&)> get;
};

#define MBP_KEY(name, expr) Key{name, [](RunConfig& c) -> Field { return &c.expr; }}

const std::vector<Key>& keys() {
  static const std::vector<Key> k = {
      MBP_KEY("crop_size", model.backbone.input_points),
      MBP_KEY("num_seeds", model.backbone.num_seeds),
      MBP_KEY("channels", model.backbone.channels),
      MBP_KEY("edge_widths", model.backbone.edge_widths),
      MBP_KEY("edge_k", model.backbone.edge_k),
      MBP_KEY("group_k", model.backbone.group_k),
      MBP_KEY("model_dim", model.defpm.model_dim),
      MBP_KEY("layers", model.defpm.layers),
      MBP_KEY("heads", model.defpm.heads),
      MBP_KEY("ffn_hidden", model.defpm.ffn_hidden),
      MBP_KEY("write_from_output", model.defpm.write_from_output),
      MBP_KEY("mask_self_value_shared", model.defpm.mask_self_value_shared),
      MBP_KEY("proposals", model.bploc.proposals),
      MBP_KEY("grid_x", model.bploc.grid.nx),
      MBP_KEY("grid_y", model.bploc.grid.ny),
      MBP_KEY("grid_z", model.bploc.grid.nz),
      MBP_KEY("reference_k", model.bploc.k),
      MBP_KEY("conv_layers", model.bploc.conv_layers),
      MBP_KEY("init_seed", model.init_seed),
      MBP_KEY("memory_train", train.train_memory),
      MBP_KEY("memory_test", tracker.memory_size),
      MBP_KEY("margin", tracker.margin),
      MBP_KEY("lost_threshold", tracker.lost_threshold),
      MBP_KEY("positive_radius", train.loss.positive_radius),
      MBP_KEY("smooth_l1_beta", train.loss.smooth_l1_beta),
      MBP_KEY("lambda_mask", train.weights.mask),
      MBP_KEY("lambda_center", train.weights.center),
      MBP_KEY("lambda_quality", train.weights.quality),
      MBP_KEY("lambda_score", train.weights.score),
      MBP_KEY("positive_sampling", train.positive_sampling),
      MBP_KEY("positive_fraction", train.sampling.fraction),
      MBP_KEY("positive_sigma", train.sampling.sigma),
      MBP_KEY("sample_len", train.sample_len),
      MBP_KEY("epochs", train.epochs),
      MBP_KEY("batch_size", train.batch_size),
      MBP_KEY("lr", train.adam.lr),
      MBP_KEY("grad_clip", train.adam.grad_clip),
      MBP_KEY("jitter_translation", train.jitter_translation),
      MBP_KEY("jitter_yaw", train.jitter_yaw),
      MBP_KEY("yaw_flip", train.yaw_flip),
      MBP_KEY("max_global_rotation", train.max_global_rotation),
      MBP_KEY("gt_memory_masks", train.gt_memory_masks),
      MBP_KEY("seed", train.seed),
      MBP_KEY("tracker_seed", tracker.seed),
      MBP_KEY("synth_object", synth.object),
      MBP_KEY("synth_target_points", synth.target_points),
      MBP_KEY("synth_background_points", synth.background_points),
      MBP_KEY("synth_background_radius", synth.background_radius),
      MBP_KEY("synth_max_translation", synth.max_translation),
      MBP_KEY("synth_max_dtheta", synth.max_dtheta),
      MBP_KEY("synth_occlusion_fraction", synth.occlusion_fraction),
      MBP_KEY("synth_occlusion_probability", synth.occlusion_probability),
      MBP_KEY("synth_distractors", synth.distractors),
      MBP_KEY("synth_noise_std", synth.noise_std),
      MBP_KEY("synth_seed", synth.seed),
      MBP_KEY("synth_sequences", synth_sequences),
      MBP_KEY("synth_length", synth_length),
      MBP_KEY("data_dir", data_dir),
      MBP_KEY("checkpoint", checkpoint),
      MBP_KEY("output_dir", output_dir),
  };
  return k;
}

#undef MBP_KEY

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    throw ConfigError("config key '" + key + "': cannot parse '" + v + "'");
  }
  return out;
}

template <typename T>
std::string number_text(T v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void assign(const std::string& key, Field f, const std::string& v) {
  std::visit(
      [&](auto* p) {
        using T = std::remove_pointer_t<decltype(p)>;
        if constexpr (std::is_same_v<T, bool>) {
          if (v == "true" || v == "1") *p = true;
          else if (v == "false" || v == "0") *p = false;
          else throw ConfigError("config key '" + key + "': expected true/false, got '" + v + "'");
        } else if constexpr (std::is_same_v<T, std::string>) {
          *p = v;
        } else if constexpr (std::is_same_v<T, ObjectTemplate>) {
          if (v == "car") *p = ObjectTemplate::kCar;
          else if (v == "pedestrian") *p = ObjectTemplate::kPedestrian;
          else throw ConfigError("config key '" + key + "': expected car/pedestrian, got '" + v + "'");
        } else if constexpr (std::is_same_v<T, std::vector<std::size_t>>) {
          p->clear();
          std::stringstream ss(v);
          std::string item;
          while (std::getline(ss, item, ',')) p->push_back(parse_number<std::size_t>(key, trim(item)));
        } else if constexpr (std::is_same_v<T, std::size_t>) {
          if (!v.empty() && v[0] == '-') {
            throw ConfigError("config key '" + key + "': must be non-negative, got '" + v + "'");
          }
          *p = parse_number<T>(key, v);
        } else {
          *p = parse_number<T>(key, v);
        }
      },
      f);
}

std::string render(Field f) {
  return std::visit(
      [](auto* p) -> std::string {
        using T = std::remove_pointer_t<decltype(p)>;
        if constexpr (std::is_same_v<T, bool>) {
          return *p ? "true" : "false";
        } else if constexpr (std::is_same_v<T, std::string>) {
          return *p;
        } else if constexpr (std::is_same_v<T, ObjectTemplate>) {
          return *p == ObjectTemplate::kCar ? "car" : "pedestrian";
        } else if constexpr (std::is_same_v<T, std::vector<std::size_t>>) {
          std::string s;
          for (std::size_t i = 0; i < p->size(); ++i) s += (i ? "," : "") + number_text((*p)[i]);
          return s;
        } else {
          return number_text(*p);
        }
      },
      f);
}

const Key& find_key(const std::string& name) {
  for (const auto& k : keys())
    if (name == k.name) return k;
  throw ConfigError("unknown config key '" + name + "'");
}

// Keys stored once but read by several modules.
void sync_shared(RunConfig& c) {
  c.model.defpm.channels = c.model.backbone.channels;
  c.model.bploc.channels = c.model.backbone.channels;
  c.tracker.crop_size = c.model.backbone.input_points;
  c.train.margin = c.tracker.margin;
}

void require(bool ok, const std::string& msg) {
  if (!ok) throw ConfigError("invalid config: " + msg);
}

}  // namespace

RunConfig::RunConfig() { sync_shared(*this); }

void RunConfig::validate() const {
  require(model.backbone.channels > 0, "channels must be positive");
  require(model.defpm.layers >= 1, "layers must be >= 1");
  require(model.defpm.heads >= 1 && model.defpm.model_dim % model.defpm.heads == 0,
          "model_dim must be divisible by heads");
  require(model.bploc.grid.cells() >= 1, "grid dimensions must be positive");
  require(train.train_memory >= 1, "memory_train must be >= 1");
  require(tracker.memory_size >= 1, "memory_test must be >= 1");
  require(tracker.margin >= 0.0, "margin must be >= 0");
  require(tracker.lost_threshold >= 0.0 && tracker.lost_threshold <= 1.0,
          "lost_threshold must lie in [0,1]");
  require(train.loss.positive_radius > 0.0, "positive_radius must be positive");
  require(train.weights.mask >= 0 && train.weights.center >= 0 && train.weights.quality >= 0 &&
              train.weights.score >= 0,
          "lambda weights must be non-negative");
  require(train.sampling.fraction >= 0.0 && train.sampling.fraction <= 1.0,
          "positive_fraction must lie in [0,1]");
  require(train.sampling.sigma >= 0.0, "positive_sigma must be >= 0");
  require(train.adam.lr > 0.0, "lr must be positive");
  require(train.sample_len >= 2, "sample_len must be >= 2");
  require(train.batch_size >= 1, "batch_size must be >= 1");
  try {
    model.validate();
    synth.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
  }
}

void apply_override(RunConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) {
    throw ConfigError("config override '" + assignment + "' is not key=value");
  }
  const std::string key = trim(assignment.substr(0, eq));
  assign(key, find_key(key).get(cfg), trim(assignment.substr(eq + 1)));
  sync_shared(cfg);
}

RunConfig parse_config(std::istream& is, const std::string& origin) {
  RunConfig cfg;
  std::set<std::string> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = origin + ":" + std::to_string(lineno);
    if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    if (!seen.insert(key).second) throw ConfigError(where + ": duplicate config key '" + key + "'");
    try {
      assign(key, find_key(key).get(cfg), trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError(where + ": " + e.what());
    }
  }
  sync_shared(cfg);
  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  return parse_config(in, path);
}

std::string serialize_config(const RunConfig& cfg) {
  RunConfig copy = cfg;
  std::string out;
  for (const auto& k : keys()) out += std::string(k.name) + " = " + render(k.get(copy)) + "\n";
  return out;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto& k : keys()) out.emplace_back(k.name);
  return out;
}

}  // namespace mbp
