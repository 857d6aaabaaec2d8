#include "mbptrack/checkpoint.hpp"

#include <bit>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <sstream>
#include <stdexcept>

namespace mbp {
namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint IO assumes little-endian");

constexpr const char* kMagic = "MBPTRACK-CKPT 1";

std::string read_line(std::istream& in, const std::string& path) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("checkpoint '" + path + "': truncated");
  return line;
}

}  // namespace

void save_checkpoint(const std::string& path, const RunConfig& cfg, const MbpNetwork& net) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint '" + path + "'");
  const std::string text = serialize_config(cfg);
  out << kMagic << '\n' << "config " << text.size() << '\n' << text;
  const auto& entries = net.params().entries();
  out << "params " << entries.size() << '\n';
  for (const auto& e : entries) {
    const Tensor& v = e.var.value();
    out << e.name << ' ' << v.rows() << ' ' << v.cols() << '\n';
    out.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(v.size() * sizeof(double)));
  }
  if (!out) throw std::runtime_error("failed writing checkpoint '" + path + "'");
}

Checkpoint read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint '" + path + "'");
  if (read_line(in, path) != kMagic) {
    throw std::runtime_error("checkpoint '" + path + "': bad header");
  }
  Checkpoint ck;
  std::size_t n = 0;
  {
    std::istringstream ss(read_line(in, path));
    std::string tag;
    if (!(ss >> tag >> n) || tag != "config") {
      throw std::runtime_error("checkpoint '" + path + "': missing config block");
    }
  }
  ck.config_text.resize(n);
  in.read(ck.config_text.data(), static_cast<std::streamsize>(n));
  std::size_t count = 0;
  {
    std::istringstream ss(read_line(in, path));
    std::string tag;
    if (!(ss >> tag >> count) || tag != "params") {
      throw std::runtime_error("checkpoint '" + path + "': missing params block");
    }
  }
  for (std::size_t i = 0; i < count; ++i) {
    std::istringstream ss(read_line(in, path));
    Checkpoint::Array a;
    std::size_t rows = 0, cols = 0;
    if (!(ss >> a.name >> rows >> cols)) {
      throw std::runtime_error("checkpoint '" + path + "': malformed parameter header");
    }
    a.value = Tensor(rows, cols);
    in.read(reinterpret_cast<char*>(a.value.data()),
            static_cast<std::streamsize>(rows * cols * sizeof(double)));
    if (!in) throw std::runtime_error("checkpoint '" + path + "': truncated at " + a.name);
    ck.params.push_back(std::move(a));
  }
  return ck;
}

void load_parameters(MbpNetwork& net, const Checkpoint& ckpt) {
  auto& entries = net.params().entries();
  if (entries.size() != ckpt.params.size()) {
    throw std::runtime_error("checkpoint has " + std::to_string(ckpt.params.size()) +
                             " parameters, network expects " + std::to_string(entries.size()));
  }
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& src = ckpt.params[i];
    auto& dst = entries[i];
    if (src.name != dst.name) {
      throw std::runtime_error("checkpoint parameter '" + src.name + "' where '" + dst.name +
                               "' was expected");
    }
    if (!src.value.same_shape(dst.var.value())) {
      throw std::runtime_error("checkpoint parameter '" + src.name + "' has shape " +
                               std::to_string(src.value.rows()) + "x" +
                               std::to_string(src.value.cols()) + ", network expects " +
                               std::to_string(dst.var.rows()) + "x" +
                               std::to_string(dst.var.cols()));
    }
    dst.var.mutable_value() = src.value;
  }
}

std::shared_ptr<MbpNetwork> load_network(const Checkpoint& ckpt, RunConfig* cfg_out) {
  std::istringstream ss(ckpt.config_text);
  const RunConfig cfg = parse_config(ss, "<checkpoint config>");
  auto net = std::make_shared<MbpNetwork>(cfg.model);
  load_parameters(*net, ckpt);
  if (cfg_out) *cfg_out = cfg;
  return net;
}

std::string file_hash(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::uint64_t h = 1469598103934665603ULL;
  char buf[4096];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ULL;
    }
  }
  char out[17];
  std::snprintf(out, sizeof out, "%016llx", static_cast<unsigned long long>(h));
  return out;
}

}  // namespace mbp
