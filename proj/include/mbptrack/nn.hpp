#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "mbptrack/autodiff.hpp"

namespace mbp::nn {

// Ordered registry of named trainable tensors. Registration order defines the
// checkpoint layout, so modules register deterministically at construction.
class ParameterStore {
 public:
  struct Entry {
    std::string name;
    ad::Var var;
  };

  ad::Var create(const std::string& name, Tensor init);
  const std::vector<Entry>& entries() const { return entries_; }
  std::vector<Entry>& entries() { return entries_; }
  ad::Var find(const std::string& name) const;
  void zero_grad();
  std::size_t scalar_count() const;

 private:
  std::vector<Entry> entries_;
};

// Fan-in uniform initialisation, U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
Tensor uniform_init(std::size_t rows, std::size_t cols, std::mt19937_64& rng);

struct Linear {
  ad::Var weight;  // in x out
  ad::Var bias;    // 1 x out

  Linear() = default;
  Linear(ParameterStore& store, const std::string& name, std::size_t in, std::size_t out,
         std::mt19937_64& rng);
  ad::Var operator()(const ad::Var& x) const;
  std::size_t in() const { return weight.rows(); }
  std::size_t out() const { return weight.cols(); }
};

struct LayerNorm {
  ad::Var gamma;
  ad::Var beta;

  LayerNorm() = default;
  LayerNorm(ParameterStore& store, const std::string& name, std::size_t dim);
  ad::Var operator()(const ad::Var& x) const;
};

// Stack of Linear layers with ReLU between them; `relu_last` adds one after
// the final layer as well.
struct Mlp {
  std::vector<Linear> layers;
  bool relu_last = false;

  Mlp() = default;
  Mlp(ParameterStore& store, const std::string& name, const std::vector<std::size_t>& widths,
      bool relu_last, std::mt19937_64& rng);
  ad::Var operator()(const ad::Var& x) const;
};

}  // namespace mbp::nn
