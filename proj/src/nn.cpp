#include "mbptrack/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace mbp::nn {

ad::Var ParameterStore::create(const std::string& name, Tensor init) {
  for (const auto& e : entries_)
    if (e.name == name) throw std::invalid_argument("duplicate parameter name: " + name);
  ad::Var v(std::move(init), true);
  entries_.push_back({name, v});
  return v;
}

ad::Var ParameterStore::find(const std::string& name) const {
  for (const auto& e : entries_)
    if (e.name == name) return e.var;
  throw std::out_of_range("unknown parameter: " + name);
}

void ParameterStore::zero_grad() {
  for (auto& e : entries_) e.var.zero_grad();
}

std::size_t ParameterStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.var.value().size();
  return n;
}

Tensor uniform_init(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(rows));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Tensor t(rows, cols);
  for (auto& v : t.storage()) v = dist(rng);
  return t;
}

Linear::Linear(ParameterStore& store, const std::string& name, std::size_t in,
               std::size_t out, std::mt19937_64& rng)
    : weight(store.create(name + ".weight", uniform_init(in, out, rng))),
      bias(store.create(name + ".bias", Tensor(1, out))) {}

ad::Var Linear::operator()(const ad::Var& x) const {
  return ad::add_row(ad::matmul(x, weight), bias);
}

LayerNorm::LayerNorm(ParameterStore& store, const std::string& name, std::size_t dim)
    : gamma(store.create(name + ".gamma", Tensor(1, dim, 1.0))),
      beta(store.create(name + ".beta", Tensor(1, dim))) {}

ad::Var LayerNorm::operator()(const ad::Var& x) const {
  return ad::layer_norm(x, gamma, beta);
}

Mlp::Mlp(ParameterStore& store, const std::string& name,
         const std::vector<std::size_t>& widths, bool relu_last, std::mt19937_64& rng)
    : relu_last(relu_last) {
  if (widths.size() < 2) throw std::invalid_argument("Mlp needs at least two widths");
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    layers.emplace_back(store, name + "." + std::to_string(i), widths[i], widths[i + 1], rng);
  }
}

ad::Var Mlp::operator()(const ad::Var& x) const {
  ad::Var h = x;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    h = layers[i](h);
    if (i + 1 < layers.size() || relu_last) h = ad::relu(h);
  }
  return h;
}

}  // namespace mbp::nn
