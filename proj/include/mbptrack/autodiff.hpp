#pragma once

// Minimal reverse-mode automatic differentiation over 2-D float64 tensors.
//
// A Var is a shared handle to a graph node. Ops record a backward closure
// only when at least one input requires a gradient, so inference graphs carry
// no tape. backward() walks the reachable graph in reverse creation order.

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "mbptrack/tensor.hpp"

namespace mbp::ad {

struct Node {
  Tensor value;
  Tensor grad;  // allocated on first accumulation
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward_fn;
  bool requires_grad = false;
  std::uint64_t order = 0;

  void accumulate(const Tensor& g);
  Tensor& grad_buffer();
};

class Var {
 public:
  Var() = default;
  explicit Var(Tensor value, bool requires_grad = false);

  const Tensor& value() const { return node_->value; }
  Tensor& mutable_value() { return node_->value; }
  const Tensor& grad() const { return node_->grad; }
  Tensor& grad_buffer() { return node_->grad_buffer(); }
  bool has_grad() const { return !node_->grad.empty(); }
  void zero_grad();
  bool requires_grad() const { return node_ && node_->requires_grad; }
  std::size_t rows() const { return node_->value.rows(); }
  std::size_t cols() const { return node_->value.cols(); }
  bool defined() const { return static_cast<bool>(node_); }
  const std::shared_ptr<Node>& node() const { return node_; }

  static Var from_node(std::shared_ptr<Node> n);

 private:
  std::shared_ptr<Node> node_;
};

inline Var constant(Tensor t) { return Var(std::move(t), false); }

// Seeds d(loss)/d(loss) = 1 and accumulates gradients into every reachable
// node that requires them. `loss` must be 1 x 1.
void backward(const Var& loss);

Var detach(const Var& a);

Var matmul(const Var& a, const Var& b);
// a * b^T
Var matmul_nt(const Var& a, const Var& b);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
// Adds a 1 x c row to every row of a.
Var add_row(const Var& a, const Var& row);
Var scale(const Var& a, double s);
Var relu(const Var& a);
Var sigmoid(const Var& a);
Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps = 1e-5);
Var softmax_rows(const Var& a);
Var concat_cols(std::span<const Var> parts);
Var concat_rows(std::span<const Var> parts);
Var slice_cols(const Var& a, std::size_t begin, std::size_t count);
Var gather_rows(const Var& a, std::span<const std::size_t> index);
// out row r = concat over q of a[index(r, q)] (zero block when index < 0).
// index is rows x width, row-major.
Var gather_blocks(const Var& a, std::span<const std::ptrdiff_t> index, std::size_t width);
// Max over consecutive groups of `group` rows: (g*n) x c -> n x c.
Var group_max(const Var& a, std::size_t group);
Var sum(const Var& a);
// sum_i w_i * sum_j a_ij
Var row_weighted_sum(const Var& a, std::span<const double> w);
// Elementwise binary cross-entropy on logits with fixed labels, weighted sum.
Var bce_with_logits_sum(const Var& logits, std::span<const double> labels,
                        std::span<const double> weights);
// sum_i w_i * sum_j smooth_l1(a_ij - target_ij; beta)
Var smooth_l1_sum(const Var& a, const Tensor& target, std::span<const double> row_weights,
                  double beta);

}  // namespace mbp::ad
