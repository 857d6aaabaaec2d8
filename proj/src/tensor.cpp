#include "mbptrack/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "mbptrack/simd.hpp"

namespace mbp {

Tensor::Tensor(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Tensor::Tensor(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw std::invalid_argument("Tensor: data size " + std::to_string(data_.size()) +
                                " does not match shape " + std::to_string(rows) + "x" +
                                std::to_string(cols));
  }
}

Tensor::Tensor(std::size_t rows, std::size_t cols, std::initializer_list<double> data)
    : Tensor(rows, cols, std::vector<double>(data)) {}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

Tensor Tensor::transposed() const {
  Tensor t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  return t;
}

double Tensor::max_abs() const {
  double m = 0.0;
  for (double v : data_) m = std::max(m, std::abs(v));
  return m;
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void gemm_acc(const Tensor& a, bool trans_a, const Tensor& b, bool trans_b, Tensor& out) {
  const std::size_t n = trans_a ? a.cols() : a.rows();
  const std::size_t k = trans_a ? a.rows() : a.cols();
  const std::size_t kb = trans_b ? b.cols() : b.rows();
  const std::size_t m = trans_b ? b.rows() : b.cols();
  if (k != kb || out.rows() != n || out.cols() != m) {
    throw std::invalid_argument("gemm: shape mismatch (" + std::to_string(n) + "x" +
                                std::to_string(k) + ") * (" + std::to_string(kb) + "x" +
                                std::to_string(m) + ") -> " + std::to_string(out.rows()) +
                                "x" + std::to_string(out.cols()));
  }
  if (n == 0 || m == 0 || k == 0) return;
  const auto& kt = simd::active();
  if (!trans_a && !trans_b) {
    kt.gemm(n, k, m, a.data(), b.data(), out.data());
  } else if (!trans_a && trans_b && m <= 2) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j)
        out(i, j) += kt.dot(k, a.data() + i * k, b.data() + j * k);
  } else {
    const Tensor at = trans_a ? a.transposed() : Tensor();
    const Tensor bt = trans_b ? b.transposed() : Tensor();
    kt.gemm(n, k, m, trans_a ? at.data() : a.data(), trans_b ? bt.data() : b.data(),
            out.data());
  }
}

Tensor matmul(const Tensor& a, const Tensor& b, bool trans_a, bool trans_b) {
  Tensor out(trans_a ? a.cols() : a.rows(), trans_b ? b.rows() : b.cols());
  gemm_acc(a, trans_a, b, trans_b, out);
  return out;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("max_abs_diff: shape mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace mbp
