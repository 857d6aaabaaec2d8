#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "mbptrack/autodiff.hpp"
#include "mbptrack/geometry.hpp"
#include "mbptrack/model.hpp"

namespace mbp::testing {

inline PointCloud random_cloud(std::size_t n, std::mt19937_64& rng, double half = 1.0) {
  std::uniform_real_distribution<double> u(-half, half);
  PointCloud out(n);
  for (auto& p : out) p = {u(rng), u(rng), u(rng)};
  return out;
}

inline Tensor random_tensor(std::size_t r, std::size_t c, std::mt19937_64& rng, double s = 1.0) {
  std::uniform_real_distribution<double> u(-s, s);
  Tensor t(r, c);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = u(rng);
  return t;
}

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst;
  std::size_t checked = 0;
};

// Compares backward() against central differences for up to `per_tensor`
// entries of each variable. Relative error uses max(|a|, |n|, floor).
inline GradCheckReport grad_check(const std::function<ad::Var()>& loss_fn,
                                  std::vector<std::pair<std::string, ad::Var>> vars,
                                  std::size_t per_tensor, std::mt19937_64& rng,
                                  double h = 1e-5, double floor = 1e-6) {
  for (auto& [_, v] : vars) v.zero_grad();
  const ad::Var loss = loss_fn();
  ad::backward(loss);
  std::vector<Tensor> analytic;
  for (auto& [_, v] : vars) analytic.push_back(v.has_grad() ? v.grad() : Tensor(v.rows(), v.cols()));
  GradCheckReport rep;
  for (std::size_t t = 0; t < vars.size(); ++t) {
    ad::Var& v = vars[t].second;
    const std::size_t n = v.value().size();
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(std::min(n, per_tensor));
    for (std::size_t i : idx) {
      const double orig = v.value()[i];
      v.mutable_value()[i] = orig + h;
      const double lp = loss_fn().value()[0];
      v.mutable_value()[i] = orig - h;
      const double lm = loss_fn().value()[0];
      v.mutable_value()[i] = orig;
      const double num = (lp - lm) / (2.0 * h);
      const double a = analytic[t][i];
      const double rel = std::abs(a - num) / std::max({std::abs(a), std::abs(num), floor});
      ++rep.checked;
      if (rel > rep.max_rel_error) {
        rep.max_rel_error = rel;
        rep.worst = vars[t].first + "[" + std::to_string(i) + "] analytic=" + std::to_string(a) +
                    " numeric=" + std::to_string(num);
      }
    }
  }
  for (auto& [_, v] : vars) v.zero_grad();
  return rep;
}

// Small network for fast tests.
inline ModelConfig tiny_model(std::size_t crop = 32, std::size_t seeds = 16, std::size_t c = 16) {
  ModelConfig m;
  m.backbone.input_points = crop;
  m.backbone.num_seeds = seeds;
  m.backbone.edge_widths = {8, 16};
  m.backbone.edge_k = 4;
  m.backbone.group_k = 4;
  m.set_channels(c);
  m.bploc.proposals = 4;
  m.bploc.grid = {2, 2, 2};
  m.bploc.k = 4;
  m.init_seed = 7;
  return m;
}

}  // namespace mbp::testing
