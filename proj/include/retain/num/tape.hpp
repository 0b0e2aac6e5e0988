// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "retain/num/matrix.hpp"

namespace retain::num {

class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::uint32_t id) : tape_(tape), id_(id) {}

  bool valid() const { return tape_ != nullptr; }
  Tape& tape() const { return *tape_; }
  std::uint32_t id() const { return id_; }
  const Matrix& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }

 private:
  Tape* tape_ = nullptr;
  std::uint32_t id_ = 0;
};

/// Ordered record of matrix-valued operations for reverse-mode differentiation.
///
/// Nodes are appended in evaluation order, so a reverse sweep over the node
/// list is a valid topological order. Gradients accumulate additively when a
/// value feeds several consumers. A tape is single-threaded.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, const Matrix& grad_out)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Matrix value);
  Var constant(Matrix value);
  /// Used by op implementations. `backward` is dropped when no input needs a gradient.
  Var record(Matrix value, bool requires_grad, BackwardFn backward);

  const Matrix& value(Var v) const { return nodes_[v.id()].value; }
  bool requires_grad(Var v) const { return nodes_[v.id()].requires_grad; }
  /// Accumulated gradient, or zeros shaped like the value if nothing reached it.
  Matrix grad(Var v) const;
  void accumulate(Var v, const Matrix& g);

  /// Seeds d(root)/d(root) = 1 for a 1x1 root and sweeps the tape backwards.
  void backward(Var root);
  void zero_grad();

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    BackwardFn backward;
    bool requires_grad = false;
  };
  std::vector<Node> nodes_;
};

inline const Matrix& Var::value() const { return tape_->value(*this); }

// Recorded primitives. Shapes follow the plain kernels in matrix.hpp.
Var matmul(Var a, Var b);
Var matmul_nt(Var a, Var b);  // a * b^T
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var add_bias(Var a, Var bias);  // bias has a.cols() entries, broadcast over rows
Var mul(Var a, Var b);          // elementwise
Var scale(Var a, double s);
Var scale_rows(Var a, Var s);   // s is rows x 1
Var sigmoid(Var a);
Var tanh(Var a);
Var slice_cols(Var a, std::size_t start, std::size_t count);
Var slice_rows(Var a, std::size_t start, std::size_t count);
Var concat_cols(std::span<const Var> parts);
Var concat_rows(std::span<const Var> parts);
Var sum(std::span<const Var> terms);
Var softmax_rows(Var a);
/// Same row-major data viewed as rows x cols.
Var reshape(Var a, std::size_t rows, std::size_t cols);
Var transpose(Var a);
/// `a` holds `blocks` stacked blocks of equal height n; returns their n x cols sum.
Var sum_row_blocks(Var a, std::size_t blocks);
/// Identity on the forward pass; multiplies the incoming gradient by `factor`.
Var reverse_gradient(Var a, double factor = -1.0);
Var sum_squares(Var a);
/// Mean squared error between an n x 1 prediction and a fixed n x 1 target.
Var mse(Var pred, const Matrix& target);
/// Mean negative log-likelihood of `labels` under row-stochastic `probs`, probabilities floored at `floor`.
Var cross_entropy(Var probs, std::span<const int> labels, double floor = 1e-12);

}  // namespace retain::num
