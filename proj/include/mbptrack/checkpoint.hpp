#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "mbptrack/config.hpp"
#include "mbptrack/model.hpp"

namespace mbp {

// Checkpoint layout (all integers decimal text, arrays binary little-endian):
//   MBPTRACK-CKPT 1\n
//   config <byte count>\n<config text>
//   params <count>\n
//   per parameter: <name> <rows> <cols>\n<rows*cols float64>
struct Checkpoint {
  std::string config_text;
  struct Array {
    std::string name;
    Tensor value;
  };
  std::vector<Array> params;
};

void save_checkpoint(const std::string& path, const RunConfig& cfg, const MbpNetwork& net);
Checkpoint read_checkpoint(const std::string& path);

// Rebuilds the network described by the stored config and loads its weights.
// Names and shapes must match exactly.
std::shared_ptr<MbpNetwork> load_network(const Checkpoint& ckpt, RunConfig* cfg_out = nullptr);
void load_parameters(MbpNetwork& net, const Checkpoint& ckpt);

// 64-bit FNV-1a of a file's bytes, as 16 hex digits.
std::string file_hash(const std::string& path);

}  // namespace mbp
