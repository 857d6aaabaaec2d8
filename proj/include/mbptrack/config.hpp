#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "mbptrack/data.hpp"
#include "mbptrack/model.hpp"
#include "mbptrack/tracker.hpp"
#include "mbptrack/train.hpp"

namespace mbp {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Every tunable of the pipeline. Serialized as flat `key = value` lines with
// `#` comments; unknown or repeated keys are rejected.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  TrackerConfig tracker;
  SynthConfig synth;
  std::size_t synth_sequences = 16;
  std::size_t synth_length = 24;
  std::string data_dir = "data";
  std::string checkpoint = "model.ckpt";
  std::string output_dir = "out";

  RunConfig();
  // Cross-field checks (shared crop size, seeds, positive values).
  void validate() const;
};

RunConfig parse_config(std::istream& is, const std::string& origin = "<config>");
RunConfig load_config(const std::string& path);
// Applies one `key=value` override on top of an existing config.
void apply_override(RunConfig& cfg, const std::string& assignment);
// Canonical text form: every key, in a fixed order. parse_config inverts it.
std::string serialize_config(const RunConfig& cfg);
std::vector<std::string> config_keys();

}  // namespace mbp
