#include "mbptrack/autodiff.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <unordered_set>

#include "mbptrack/simd.hpp"

namespace mbp::ad {
namespace {

std::atomic<std::uint64_t> g_order{0};

std::shared_ptr<Node> make_node(Tensor value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->order = g_order.fetch_add(1, std::memory_order_relaxed);
  return n;
}

// Creates the result node; inputs and closure are kept only if some input
// needs a gradient.
Var make_result(Tensor value, std::initializer_list<Var> inputs,
                std::function<void(Node&)> fn) {
  auto n = make_node(std::move(value));
  bool any = false;
  for (const auto& v : inputs) any = any || v.requires_grad();
  if (any) {
    n->requires_grad = true;
    for (const auto& v : inputs) n->inputs.push_back(v.node());
    n->backward_fn = std::move(fn);
  }
  return Var::from_node(std::move(n));
}

Var make_result_list(Tensor value, std::span<const Var> inputs,
                     std::function<void(Node&)> fn) {
  auto n = make_node(std::move(value));
  bool any = false;
  for (const auto& v : inputs) any = any || v.requires_grad();
  if (any) {
    n->requires_grad = true;
    for (const auto& v : inputs) n->inputs.push_back(v.node());
    n->backward_fn = std::move(fn);
  }
  return Var::from_node(std::move(n));
}

void check_same(const Var& a, const Var& b, const char* op) {
  if (!a.value().same_shape(b.value())) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                                " vs " + std::to_string(b.rows()) + "x" +
                                std::to_string(b.cols()));
  }
}

bool wants(const std::shared_ptr<Node>& n) { return n->requires_grad; }

}  // namespace

Tensor& Node::grad_buffer() {
  if (grad.empty() && !value.empty()) grad = Tensor(value.rows(), value.cols());
  return grad;
}

void Node::accumulate(const Tensor& g) {
  Tensor& buf = grad_buffer();
  simd::active().axpy(g.size(), 1.0, g.data(), buf.data());
}

Var::Var(Tensor value, bool requires_grad) : node_(make_node(std::move(value))) {
  node_->requires_grad = requires_grad;
}

Var Var::from_node(std::shared_ptr<Node> n) {
  Var v;
  v.node_ = std::move(n);
  return v;
}

void Var::zero_grad() {
  if (!node_->grad.empty()) node_->grad.fill(0.0);
}

void backward(const Var& loss) {
  if (loss.rows() != 1 || loss.cols() != 1) {
    throw std::invalid_argument("backward: loss must be a 1x1 tensor");
  }
  if (!loss.requires_grad()) return;
  std::vector<Node*> nodes;
  std::unordered_set<Node*> seen;
  std::vector<Node*> stack{loss.node().get()};
  while (!stack.empty()) {
    Node* n = stack.back();
    stack.pop_back();
    if (!seen.insert(n).second) continue;
    nodes.push_back(n);
    for (const auto& in : n->inputs)
      if (in->requires_grad) stack.push_back(in.get());
  }
  std::sort(nodes.begin(), nodes.end(),
            [](const Node* a, const Node* b) { return a->order > b->order; });
  loss.node()->grad_buffer()[0] += 1.0;
  for (Node* n : nodes) {
    if (n->backward_fn && !n->grad.empty()) n->backward_fn(*n);
  }
  // Interior gradients are not needed after the sweep.
  for (Node* n : nodes) {
    if (n->backward_fn) n->grad = Tensor();
  }
}

Var detach(const Var& a) { return constant(a.value()); }

Var matmul(const Var& a, const Var& b) {
  Tensor out = mbp::matmul(a.value(), b.value());
  return make_result(std::move(out), {a, b}, [](Node& n) {
    auto& A = n.inputs[0];
    auto& B = n.inputs[1];
    if (wants(A)) gemm_acc(n.grad, false, B->value, true, A->grad_buffer());
    if (wants(B)) gemm_acc(A->value, true, n.grad, false, B->grad_buffer());
  });
}

Var matmul_nt(const Var& a, const Var& b) {
  Tensor out = mbp::matmul(a.value(), b.value(), false, true);
  return make_result(std::move(out), {a, b}, [](Node& n) {
    auto& A = n.inputs[0];
    auto& B = n.inputs[1];
    if (wants(A)) gemm_acc(n.grad, false, B->value, false, A->grad_buffer());
    if (wants(B)) gemm_acc(n.grad, true, A->value, false, B->grad_buffer());
  });
}

Var add(const Var& a, const Var& b) {
  check_same(a, b, "add");
  Tensor out = a.value();
  simd::active().axpy(out.size(), 1.0, b.value().data(), out.data());
  return make_result(std::move(out), {a, b}, [](Node& n) {
    for (auto& in : n.inputs)
      if (wants(in)) in->accumulate(n.grad);
  });
}

Var sub(const Var& a, const Var& b) {
  check_same(a, b, "sub");
  Tensor out = a.value();
  simd::active().axpy(out.size(), -1.0, b.value().data(), out.data());
  return make_result(std::move(out), {a, b}, [](Node& n) {
    if (wants(n.inputs[0])) n.inputs[0]->accumulate(n.grad);
    if (wants(n.inputs[1])) {
      Tensor& g = n.inputs[1]->grad_buffer();
      simd::active().axpy(g.size(), -1.0, n.grad.data(), g.data());
    }
  });
}

Var mul(const Var& a, const Var& b) {
  check_same(a, b, "mul");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  return make_result(std::move(out), {a, b}, [](Node& n) {
    auto& A = n.inputs[0];
    auto& B = n.inputs[1];
    if (wants(A)) {
      Tensor& g = A->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] * B->value[i];
    }
    if (wants(B)) {
      Tensor& g = B->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] * A->value[i];
    }
  });
}

Var add_row(const Var& a, const Var& row) {
  if (row.rows() != 1 || row.cols() != a.cols()) {
    throw std::invalid_argument("add_row: row must be 1x" + std::to_string(a.cols()));
  }
  Tensor out = a.value();
  const auto& kt = simd::active();
  for (std::size_t r = 0; r < out.rows(); ++r)
    kt.axpy(out.cols(), 1.0, row.value().data(), out.row(r).data());
  return make_result(std::move(out), {a, row}, [](Node& n) {
    if (wants(n.inputs[0])) n.inputs[0]->accumulate(n.grad);
    if (wants(n.inputs[1])) {
      Tensor& g = n.inputs[1]->grad_buffer();
      const auto& kt = simd::active();
      for (std::size_t r = 0; r < n.grad.rows(); ++r)
        kt.axpy(g.size(), 1.0, n.grad.row(r).data(), g.data());
    }
  });
}

Var scale(const Var& a, double s) {
  Tensor out = a.value();
  for (auto& v : out.storage()) v *= s;
  return make_result(std::move(out), {a}, [s](Node& n) {
    Tensor& g = n.inputs[0]->grad_buffer();
    simd::active().axpy(g.size(), s, n.grad.data(), g.data());
  });
}

Var relu(const Var& a) {
  Tensor out = a.value();
  for (auto& v : out.storage()) v = v > 0.0 ? v : 0.0;
  return make_result(std::move(out), {a}, [](Node& n) {
    Tensor& g = n.inputs[0]->grad_buffer();
    const Tensor& x = n.inputs[0]->value;
    for (std::size_t i = 0; i < g.size(); ++i)
      if (x[i] > 0.0) g[i] += n.grad[i];
  });
}

Var sigmoid(const Var& a) {
  Tensor out = a.value();
  for (auto& v : out.storage()) v = 1.0 / (1.0 + std::exp(-v));
  return make_result(std::move(out), {a}, [](Node& n) {
    Tensor& g = n.inputs[0]->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double s = n.value[i];
      g[i] += n.grad[i] * s * (1.0 - s);
    }
  });
}

Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps) {
  const std::size_t rows = x.rows();
  const std::size_t c = x.cols();
  if (gamma.rows() != 1 || gamma.cols() != c || beta.rows() != 1 || beta.cols() != c) {
    throw std::invalid_argument("layer_norm: gamma/beta must be 1x" + std::to_string(c));
  }
  Tensor xhat(rows, c);
  std::vector<double> inv_std(rows);
  Tensor out(rows, c);
  for (std::size_t r = 0; r < rows; ++r) {
    auto xr = x.value().row(r);
    double mean = 0.0;
    for (double v : xr) mean += v;
    mean /= static_cast<double>(c);
    double var = 0.0;
    for (double v : xr) var += (v - mean) * (v - mean);
    var /= static_cast<double>(c);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < c; ++j) {
      xhat(r, j) = (xr[j] - mean) * inv_std[r];
      out(r, j) = xhat(r, j) * gamma.value()[j] + beta.value()[j];
    }
  }
  return make_result(std::move(out), {x, gamma, beta},
                     [xhat = std::move(xhat), inv_std = std::move(inv_std)](Node& n) {
    auto& X = n.inputs[0];
    auto& G = n.inputs[1];
    auto& B = n.inputs[2];
    const std::size_t rows = n.grad.rows();
    const std::size_t c = n.grad.cols();
    if (wants(G)) {
      Tensor& g = G->grad_buffer();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < c; ++j) g[j] += n.grad(r, j) * xhat(r, j);
    }
    if (wants(B)) {
      Tensor& g = B->grad_buffer();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < c; ++j) g[j] += n.grad(r, j);
    }
    if (wants(X)) {
      Tensor& g = X->grad_buffer();
      std::vector<double> dxhat(c);
      for (std::size_t r = 0; r < rows; ++r) {
        double mean_d = 0.0, mean_dx = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
          dxhat[j] = n.grad(r, j) * G->value[j];
          mean_d += dxhat[j];
          mean_dx += dxhat[j] * xhat(r, j);
        }
        mean_d /= static_cast<double>(c);
        mean_dx /= static_cast<double>(c);
        for (std::size_t j = 0; j < c; ++j)
          g(r, j) += inv_std[r] * (dxhat[j] - mean_d - xhat(r, j) * mean_dx);
      }
    }
  });
}

Var softmax_rows(const Var& a) {
  Tensor out = a.value();
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    const double mx = *std::max_element(row.begin(), row.end());
    double s = 0.0;
    for (auto& v : row) {
      v = std::exp(v - mx);
      s += v;
    }
    for (auto& v : row) v /= s;
  }
  return make_result(std::move(out), {a}, [](Node& n) {
    Tensor& g = n.inputs[0]->grad_buffer();
    const auto& kt = simd::active();
    for (std::size_t r = 0; r < n.value.rows(); ++r) {
      auto y = n.value.row(r);
      auto dy = n.grad.row(r);
      const double d = kt.dot(y.size(), y.data(), dy.data());
      auto gr = g.row(r);
      for (std::size_t j = 0; j < y.size(); ++j) gr[j] += y[j] * (dy[j] - d);
    }
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
  const std::size_t rows = parts[0].rows();
  std::size_t cols = 0;
  for (const auto& p : parts) {
    if (p.rows() != rows) throw std::invalid_argument("concat_cols: row count mismatch");
    cols += p.cols();
  }
  Tensor out(rows, cols);
  std::size_t off = 0;
  for (const auto& p : parts) {
    for (std::size_t r = 0; r < rows; ++r)
      std::copy_n(p.value().row(r).data(), p.cols(), out.row(r).data() + off);
    off += p.cols();
  }
  return make_result_list(std::move(out), parts, [](Node& n) {
    std::size_t off = 0;
    for (auto& in : n.inputs) {
      const std::size_t c = in->value.cols();
      if (wants(in)) {
        Tensor& g = in->grad_buffer();
        for (std::size_t r = 0; r < g.rows(); ++r)
          for (std::size_t j = 0; j < c; ++j) g(r, j) += n.grad(r, off + j);
      }
      off += c;
    }
  });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: no inputs");
  const std::size_t cols = parts[0].cols();
  std::size_t rows = 0;
  for (const auto& p : parts) {
    if (p.cols() != cols) throw std::invalid_argument("concat_rows: column count mismatch");
    rows += p.rows();
  }
  std::vector<double> data;
  data.reserve(rows * cols);
  for (const auto& p : parts)
    data.insert(data.end(), p.value().storage().begin(), p.value().storage().end());
  return make_result_list(Tensor(rows, cols, std::move(data)), parts, [](Node& n) {
    std::size_t off = 0;
    for (auto& in : n.inputs) {
      const std::size_t cnt = in->value.size();
      if (wants(in)) {
        Tensor& g = in->grad_buffer();
        simd::active().axpy(cnt, 1.0, n.grad.data() + off, g.data());
      }
      off += cnt;
    }
  });
}

Var slice_cols(const Var& a, std::size_t begin, std::size_t count) {
  if (begin + count > a.cols()) throw std::invalid_argument("slice_cols: out of range");
  Tensor out(a.rows(), count);
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (std::size_t j = 0; j < count; ++j) out(r, j) = a.value()(r, begin + j);
  return make_result(std::move(out), {a}, [begin](Node& n) {
    Tensor& g = n.inputs[0]->grad_buffer();
    for (std::size_t r = 0; r < n.grad.rows(); ++r)
      for (std::size_t j = 0; j < n.grad.cols(); ++j) g(r, begin + j) += n.grad(r, j);
  });
}

Var gather_rows(const Var& a, std::span<const std::size_t> index) {
  const std::size_t c = a.cols();
  Tensor out(index.size(), c);
  for (std::size_t r = 0; r < index.size(); ++r) {
    if (index[r] >= a.rows()) throw std::out_of_range("gather_rows: index out of range");
    std::copy_n(a.value().row(index[r]).data(), c, out.row(r).data());
  }
  std::vector<std::size_t> idx(index.begin(), index.end());
  return make_result(std::move(out), {a}, [idx = std::move(idx)](Node& n) {
    Tensor& g = n.inputs[0]->grad_buffer();
    const auto& kt = simd::active();
    const std::size_t c = g.cols();
    for (std::size_t r = 0; r < idx.size(); ++r)
      kt.axpy(c, 1.0, n.grad.row(r).data(), g.row(idx[r]).data());
  });
}

Var gather_blocks(const Var& a, std::span<const std::ptrdiff_t> index, std::size_t width) {
  if (width == 0 || index.size() % width != 0) {
    throw std::invalid_argument("gather_blocks: index size not a multiple of width");
  }
  const std::size_t c = a.cols();
  const std::size_t rows = index.size() / width;
  Tensor out(rows, width * c);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t q = 0; q < width; ++q) {
      const std::ptrdiff_t src = index[r * width + q];
      if (src < 0) continue;
      if (static_cast<std::size_t>(src) >= a.rows())
        throw std::out_of_range("gather_blocks: index out of range");
      std::copy_n(a.value().row(static_cast<std::size_t>(src)).data(), c,
                  out.row(r).data() + q * c);
    }
  }
  std::vector<std::ptrdiff_t> idx(index.begin(), index.end());
  return make_result(std::move(out), {a}, [idx = std::move(idx), width](Node& n) {
    Tensor& g = n.inputs[0]->grad_buffer();
    const auto& kt = simd::active();
    const std::size_t c = g.cols();
    for (std::size_t r = 0; r < n.grad.rows(); ++r) {
      for (std::size_t q = 0; q < width; ++q) {
        const std::ptrdiff_t src = idx[r * width + q];
        if (src < 0) continue;
        kt.axpy(c, 1.0, n.grad.row(r).data() + q * c,
                g.row(static_cast<std::size_t>(src)).data());
      }
    }
  });
}

Var group_max(const Var& a, std::size_t group) {
  if (group == 0 || a.rows() % group != 0) {
    throw std::invalid_argument("group_max: rows not divisible by group size");
  }
  const std::size_t n_out = a.rows() / group;
  const std::size_t c = a.cols();
  Tensor out(n_out, c);
  std::vector<std::uint32_t> arg(n_out * c);
  for (std::size_t o = 0; o < n_out; ++o) {
    for (std::size_t j = 0; j < c; ++j) {
      std::size_t best = o * group;
      double bv = a.value()(best, j);
      for (std::size_t q = 1; q < group; ++q) {
        const double v = a.value()(o * group + q, j);
        if (v > bv) {
          bv = v;
          best = o * group + q;
        }
      }
      out(o, j) = bv;
      arg[o * c + j] = static_cast<std::uint32_t>(best);
    }
  }
  return make_result(std::move(out), {a}, [arg = std::move(arg)](Node& n) {
    Tensor& g = n.inputs[0]->grad_buffer();
    const std::size_t c = n.grad.cols();
    for (std::size_t o = 0; o < n.grad.rows(); ++o)
      for (std::size_t j = 0; j < c; ++j) g(arg[o * c + j], j) += n.grad(o, j);
  });
}

Var sum(const Var& a) {
  double s = 0.0;
  for (double v : a.value().storage()) s += v;
  return make_result(Tensor(1, 1, s), {a}, [](Node& n) {
    Tensor& g = n.inputs[0]->grad_buffer();
    const double d = n.grad[0];
    for (auto& v : g.storage()) v += d;
  });
}

Var row_weighted_sum(const Var& a, std::span<const double> w) {
  if (w.size() != a.rows()) throw std::invalid_argument("row_weighted_sum: weight count");
  double s = 0.0;
  for (std::size_t r = 0; r < a.rows(); ++r) {
    if (w[r] == 0.0) continue;
    double rs = 0.0;
    for (double v : a.value().row(r)) rs += v;
    s += w[r] * rs;
  }
  std::vector<double> wv(w.begin(), w.end());
  return make_result(Tensor(1, 1, s), {a}, [wv = std::move(wv)](Node& n) {
    Tensor& g = n.inputs[0]->grad_buffer();
    const double d = n.grad[0];
    for (std::size_t r = 0; r < g.rows(); ++r) {
      if (wv[r] == 0.0) continue;
      for (auto& v : g.row(r)) v += d * wv[r];
    }
  });
}

Var bce_with_logits_sum(const Var& logits, std::span<const double> labels,
                        std::span<const double> weights) {
  const std::size_t n = logits.value().size();
  if (labels.size() != n || weights.size() != n) {
    throw std::invalid_argument("bce_with_logits_sum: label/weight size mismatch");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = logits.value()[i];
    // max(x,0) - x*y + log(1 + exp(-|x|))
    const double l = std::max(x, 0.0) - x * labels[i] + std::log1p(std::exp(-std::abs(x)));
    s += weights[i] * l;
  }
  std::vector<double> y(labels.begin(), labels.end());
  std::vector<double> w(weights.begin(), weights.end());
  return make_result(Tensor(1, 1, s), {logits},
                     [y = std::move(y), w = std::move(w)](Node& node) {
    Tensor& g = node.inputs[0]->grad_buffer();
    const Tensor& x = node.inputs[0]->value;
    const double d = node.grad[0];
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double p = 1.0 / (1.0 + std::exp(-x[i]));
      g[i] += d * w[i] * (p - y[i]);
    }
  });
}

Var smooth_l1_sum(const Var& a, const Tensor& target, std::span<const double> row_weights,
                  double beta) {
  if (!a.value().same_shape(target) || row_weights.size() != a.rows()) {
    throw std::invalid_argument("smooth_l1_sum: shape mismatch");
  }
  if (!(beta > 0.0)) throw std::invalid_argument("smooth_l1_sum: beta must be positive");
  double s = 0.0;
  for (std::size_t r = 0; r < a.rows(); ++r) {
    if (row_weights[r] == 0.0) continue;
    for (std::size_t j = 0; j < a.cols(); ++j) {
      const double e = std::abs(a.value()(r, j) - target(r, j));
      s += row_weights[r] * (e < beta ? 0.5 * e * e / beta : e - 0.5 * beta);
    }
  }
  std::vector<double> w(row_weights.begin(), row_weights.end());
  return make_result(Tensor(1, 1, s), {a}, [t = target, w = std::move(w), beta](Node& n) {
    Tensor& g = n.inputs[0]->grad_buffer();
    const Tensor& x = n.inputs[0]->value;
    const double d = n.grad[0];
    for (std::size_t r = 0; r < g.rows(); ++r) {
      if (w[r] == 0.0) continue;
      for (std::size_t j = 0; j < g.cols(); ++j) {
        const double e = x(r, j) - t(r, j);
        const double de = std::abs(e) < beta ? e / beta : (e > 0.0 ? 1.0 : -1.0);
        g(r, j) += d * w[r] * de;
      }
    }
  });
}

}  // namespace mbp::ad
