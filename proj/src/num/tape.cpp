// SPDX-License-Identifier: Apache-2.0
#include "retain/num/tape.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "retain/errors.hpp"

namespace retain::num {

Var Tape::leaf(Matrix value) {
  nodes_.push_back(Node{std::move(value), Matrix{}, nullptr, true});
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Var Tape::constant(Matrix value) {
  nodes_.push_back(Node{std::move(value), Matrix{}, nullptr, false});
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Var Tape::record(Matrix value, bool requires_grad, BackwardFn backward) {
  nodes_.push_back(Node{std::move(value), Matrix{}, requires_grad ? std::move(backward) : nullptr, requires_grad});
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Matrix Tape::grad(Var v) const {
  const Node& n = nodes_[v.id()];
  if (n.grad.empty()) return Matrix(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::accumulate(Var v, const Matrix& g) {
  Node& n = nodes_[v.id()];
  if (!n.requires_grad) return;
  if (!g.same_shape(n.value)) {
    throw DimensionError("Tape::accumulate: gradient " + g.shape_string() + " for value " + n.value.shape_string());
  }
  if (n.grad.empty()) {
    n.grad = g;
  } else {
    n.grad += g;
  }
}

void Tape::backward(Var root) {
  if (root.valid() && &root.tape() != this) throw ConsistencyError("Tape::backward: root belongs to another tape");
  const Matrix& rv = nodes_[root.id()].value;
  if (rv.rows() != 1 || rv.cols() != 1) throw DimensionError("Tape::backward: root must be 1x1, got " + rv.shape_string());
  accumulate(root, Matrix(1, 1, 1.0));
  for (std::size_t i = root.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.backward || n.grad.empty()) continue;
    // Parents always have smaller ids, so `n.grad` is final here and not touched by the call.
    n.backward(*this, n.grad);
  }
}

void Tape::zero_grad() {
  for (Node& n : nodes_) n.grad = Matrix{};
}

namespace {

Tape& tape_of(Var a) {
  if (!a.valid()) throw ArgumentError("tape op: uninitialised Var");
  return a.tape();
}

Tape& tape_of(Var a, Var b) {
  Tape& t = tape_of(a);
  if (&tape_of(b) != &t) throw ConsistencyError("tape op: operands recorded on different tapes");
  return t;
}

[[noreturn]] void shape_error(const char* op, const Matrix& a, const Matrix& b) {
  throw DimensionError(std::string(op) + ": incompatible shapes " + a.shape_string() + " and " + b.shape_string());
}

bool needs(Var v) { return v.tape().requires_grad(v); }

}  // namespace

Var matmul(Var a, Var b) {
  Tape& t = tape_of(a, b);
  return t.record(num::matmul(a.value(), b.value()), needs(a) || needs(b), [a, b](Tape& tp, const Matrix& g) {
    if (tp.requires_grad(a)) tp.accumulate(a, num::matmul_nt(g, b.value()));
    if (tp.requires_grad(b)) tp.accumulate(b, num::matmul_tn(a.value(), g));
  });
}

Var matmul_nt(Var a, Var b) {
  Tape& t = tape_of(a, b);
  return t.record(num::matmul_nt(a.value(), b.value()), needs(a) || needs(b), [a, b](Tape& tp, const Matrix& g) {
    if (tp.requires_grad(a)) tp.accumulate(a, num::matmul(g, b.value()));
    if (tp.requires_grad(b)) tp.accumulate(b, num::matmul_tn(g, a.value()));
  });
}

Var add(Var a, Var b) {
  Tape& t = tape_of(a, b);
  if (!a.value().same_shape(b.value())) shape_error("add", a.value(), b.value());
  return t.record(a.value() + b.value(), needs(a) || needs(b), [a, b](Tape& tp, const Matrix& g) {
    tp.accumulate(a, g);
    tp.accumulate(b, g);
  });
}

Var sub(Var a, Var b) {
  Tape& t = tape_of(a, b);
  return t.record(a.value() - b.value(), needs(a) || needs(b), [a, b](Tape& tp, const Matrix& g) {
    tp.accumulate(a, g);
    if (tp.requires_grad(b)) tp.accumulate(b, -1.0 * g);
  });
}

Var add_bias(Var a, Var bias) {
  Tape& t = tape_of(a, bias);
  const Matrix& av = a.value();
  const Matrix& bv = bias.value();
  if (bv.size() != av.cols()) shape_error("add_bias", av, bv);
  Matrix out = av;
  for (std::size_t i = 0; i < av.rows(); ++i)
    for (std::size_t j = 0; j < av.cols(); ++j) out(i, j) += bv[j];
  return t.record(std::move(out), needs(a) || needs(bias), [a, bias](Tape& tp, const Matrix& g) {
    tp.accumulate(a, g);
    if (tp.requires_grad(bias)) {
      const Matrix& bv = bias.value();
      Matrix gb(bv.rows(), bv.cols());
      for (std::size_t i = 0; i < g.rows(); ++i)
        for (std::size_t j = 0; j < g.cols(); ++j) gb[j] += g(i, j);
      tp.accumulate(bias, gb);
    }
  });
}

Var mul(Var a, Var b) {
  Tape& t = tape_of(a, b);
  return t.record(hadamard(a.value(), b.value()), needs(a) || needs(b), [a, b](Tape& tp, const Matrix& g) {
    if (tp.requires_grad(a)) tp.accumulate(a, hadamard(g, b.value()));
    if (tp.requires_grad(b)) tp.accumulate(b, hadamard(g, a.value()));
  });
}

Var scale(Var a, double s) {
  Tape& t = tape_of(a);
  return t.record(s * a.value(), needs(a), [a, s](Tape& tp, const Matrix& g) { tp.accumulate(a, s * g); });
}

Var scale_rows(Var a, Var s) {
  Tape& t = tape_of(a, s);
  const Matrix& av = a.value();
  const Matrix& sv = s.value();
  if (sv.rows() != av.rows() || sv.cols() != 1) shape_error("scale_rows", av, sv);
  Matrix out = av;
  for (std::size_t i = 0; i < av.rows(); ++i)
    for (std::size_t j = 0; j < av.cols(); ++j) out(i, j) *= sv[i];
  return t.record(std::move(out), needs(a) || needs(s), [a, s](Tape& tp, const Matrix& g) {
    const Matrix& av = a.value();
    const Matrix& sv = s.value();
    if (tp.requires_grad(a)) {
      Matrix ga = g;
      for (std::size_t i = 0; i < ga.rows(); ++i)
        for (std::size_t j = 0; j < ga.cols(); ++j) ga(i, j) *= sv[i];
      tp.accumulate(a, ga);
    }
    if (tp.requires_grad(s)) {
      Matrix gs(sv.rows(), 1);
      for (std::size_t i = 0; i < g.rows(); ++i)
        for (std::size_t j = 0; j < g.cols(); ++j) gs[i] += g(i, j) * av(i, j);
      tp.accumulate(s, gs);
    }
  });
}

Var sigmoid(Var a) {
  Tape& t = tape_of(a);
  Matrix out = a.value();
  for (double& v : out.values()) v = num::sigmoid(v);
  const bool rg = needs(a);
  const auto id = t.size();
  return t.record(std::move(out), rg, [a, id](Tape& tp, const Matrix& g) {
    const Matrix& y = tp.value(Var(&tp, static_cast<std::uint32_t>(id)));
    Matrix ga(g.rows(), g.cols());
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] = g[i] * y[i] * (1.0 - y[i]);
    tp.accumulate(a, ga);
  });
}

Var tanh(Var a) {
  Tape& t = tape_of(a);
  Matrix out = a.value();
  for (double& v : out.values()) v = num::tanh_bounded(v);
  const auto id = t.size();
  return t.record(std::move(out), needs(a), [a, id](Tape& tp, const Matrix& g) {
    const Matrix& y = tp.value(Var(&tp, static_cast<std::uint32_t>(id)));
    Matrix ga(g.rows(), g.cols());
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] = g[i] * (1.0 - y[i] * y[i]);
    tp.accumulate(a, ga);
  });
}

Var slice_cols(Var a, std::size_t start, std::size_t count) {
  Tape& t = tape_of(a);
  const Matrix& av = a.value();
  if (start + count > av.cols()) {
    throw DimensionError("slice_cols: [" + std::to_string(start) + ", " + std::to_string(start + count) +
                         ") out of range for " + av.shape_string());
  }
  Matrix out(av.rows(), count);
  for (std::size_t i = 0; i < av.rows(); ++i)
    for (std::size_t j = 0; j < count; ++j) out(i, j) = av(i, start + j);
  return t.record(std::move(out), needs(a), [a, start, count](Tape& tp, const Matrix& g) {
    const Matrix& av = a.value();
    Matrix ga(av.rows(), av.cols());
    for (std::size_t i = 0; i < av.rows(); ++i)
      for (std::size_t j = 0; j < count; ++j) ga(i, start + j) = g(i, j);
    tp.accumulate(a, ga);
  });
}

Var slice_rows(Var a, std::size_t start, std::size_t count) {
  Tape& t = tape_of(a);
  const Matrix& av = a.value();
  if (start + count > av.rows()) {
    throw DimensionError("slice_rows: [" + std::to_string(start) + ", " + std::to_string(start + count) +
                         ") out of range for " + av.shape_string());
  }
  const auto first = av.values().begin() + static_cast<std::ptrdiff_t>(start * av.cols());
  Matrix out(count, av.cols(), std::vector<double>(first, first + static_cast<std::ptrdiff_t>(count * av.cols())));
  return t.record(std::move(out), needs(a), [a, start](Tape& tp, const Matrix& g) {
    const Matrix& av = a.value();
    Matrix ga(av.rows(), av.cols());
    std::copy(g.values().begin(), g.values().end(), ga.values().begin() + static_cast<std::ptrdiff_t>(start * av.cols()));
    tp.accumulate(a, ga);
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ArgumentError("concat_cols: no parts");
  Tape& t = tape_of(parts.front());
  const std::size_t rows = parts.front().rows();
  std::size_t cols = 0;
  bool rg = false;
  for (const Var& p : parts) {
    if (&tape_of(p) != &t) throw ConsistencyError("concat_cols: parts on different tapes");
    if (p.rows() != rows) shape_error("concat_cols", parts.front().value(), p.value());
    cols += p.cols();
    rg = rg || needs(p);
  }
  Matrix out(rows, cols);
  std::size_t offset = 0;
  for (const Var& p : parts) {
    const Matrix& pv = p.value();
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < pv.cols(); ++j) out(i, offset + j) = pv(i, j);
    offset += pv.cols();
  }
  std::vector<Var> owned(parts.begin(), parts.end());
  return t.record(std::move(out), rg, [owned = std::move(owned)](Tape& tp, const Matrix& g) {
    std::size_t offset = 0;
    for (const Var& p : owned) {
      const std::size_t pc = p.cols();
      if (tp.requires_grad(p)) {
        Matrix gp(g.rows(), pc);
        for (std::size_t i = 0; i < g.rows(); ++i)
          for (std::size_t j = 0; j < pc; ++j) gp(i, j) = g(i, offset + j);
        tp.accumulate(p, gp);
      }
      offset += pc;
    }
  });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw ArgumentError("concat_rows: no parts");
  Tape& t = tape_of(parts.front());
  const std::size_t cols = parts.front().cols();
  std::vector<double> data;
  bool rg = false;
  for (const Var& p : parts) {
    if (&tape_of(p) != &t) throw ConsistencyError("concat_rows: parts on different tapes");
    if (p.cols() != cols) shape_error("concat_rows", parts.front().value(), p.value());
    data.insert(data.end(), p.value().values().begin(), p.value().values().end());
    rg = rg || needs(p);
  }
  const std::size_t rows = data.size() / std::max<std::size_t>(cols, 1);
  std::vector<Var> owned(parts.begin(), parts.end());
  return t.record(Matrix(rows, cols, std::move(data)), rg, [owned = std::move(owned)](Tape& tp, const Matrix& g) {
    std::size_t offset = 0;
    for (const Var& p : owned) {
      const std::size_t n = p.value().size();
      if (tp.requires_grad(p)) {
        const auto first = g.values().begin() + static_cast<std::ptrdiff_t>(offset);
        tp.accumulate(p, Matrix(p.rows(), p.cols(), std::vector<double>(first, first + static_cast<std::ptrdiff_t>(n))));
      }
      offset += n;
    }
  });
}

Var sum(std::span<const Var> terms) {
  if (terms.empty()) throw ArgumentError("sum: no terms");
  Tape& t = tape_of(terms.front());
  Matrix out = terms.front().value();
  bool rg = needs(terms.front());
  for (std::size_t k = 1; k < terms.size(); ++k) {
    if (&tape_of(terms[k]) != &t) throw ConsistencyError("sum: terms on different tapes");
    out += terms[k].value();
    rg = rg || needs(terms[k]);
  }
  std::vector<Var> owned(terms.begin(), terms.end());
  return t.record(std::move(out), rg, [owned = std::move(owned)](Tape& tp, const Matrix& g) {
    for (const Var& v : owned) tp.accumulate(v, g);
  });
}

Var softmax_rows(Var a) {
  Tape& t = tape_of(a);
  const Matrix& av = a.value();
  if (av.cols() == 0) throw ArgumentError("softmax_rows: empty rows");
  Matrix out(av.rows(), av.cols());
  for (std::size_t i = 0; i < av.rows(); ++i) {
    const auto s = num::softmax(av.row_span(i));
    std::copy(s.begin(), s.end(), out.row_span(i).begin());
  }
  const auto id = t.size();
  return t.record(std::move(out), needs(a), [a, id](Tape& tp, const Matrix& g) {
    const Matrix& y = tp.value(Var(&tp, static_cast<std::uint32_t>(id)));
    Matrix ga(g.rows(), g.cols());
    for (std::size_t i = 0; i < g.rows(); ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < g.cols(); ++j) dot += g(i, j) * y(i, j);
      for (std::size_t j = 0; j < g.cols(); ++j) ga(i, j) = y(i, j) * (g(i, j) - dot);
    }
    tp.accumulate(a, ga);
  });
}

Var reshape(Var a, std::size_t rows, std::size_t cols) {
  Tape& t = tape_of(a);
  const Matrix& av = a.value();
  if (rows * cols != av.size()) {
    throw DimensionError("reshape: cannot view " + av.shape_string() + " as (" + std::to_string(rows) + "x" +
                         std::to_string(cols) + ")");
  }
  std::vector<double> data(av.values().begin(), av.values().end());
  return t.record(Matrix(rows, cols, std::move(data)), needs(a), [a](Tape& tp, const Matrix& g) {
    tp.accumulate(a, Matrix(a.rows(), a.cols(), std::vector<double>(g.values().begin(), g.values().end())));
  });
}

Var transpose(Var a) {
  Tape& t = tape_of(a);
  return t.record(num::transpose(a.value()), needs(a),
                  [a](Tape& tp, const Matrix& g) { tp.accumulate(a, num::transpose(g)); });
}

Var sum_row_blocks(Var a, std::size_t blocks) {
  Tape& t = tape_of(a);
  const Matrix& av = a.value();
  if (blocks == 0 || av.rows() % blocks != 0) {
    throw DimensionError("sum_row_blocks: " + av.shape_string() + " does not split into " + std::to_string(blocks) +
                         " blocks");
  }
  const std::size_t height = av.rows() / blocks;
  const std::size_t width = height * av.cols();
  Matrix out(height, av.cols());
  auto dst = out.values();
  for (std::size_t b = 0; b < blocks; ++b)
    for (std::size_t k = 0; k < width; ++k) dst[k] += av[b * width + k];
  return t.record(std::move(out), needs(a), [a, blocks, width](Tape& tp, const Matrix& g) {
    Matrix ga(a.rows(), a.cols());
    for (std::size_t b = 0; b < blocks; ++b)
      for (std::size_t k = 0; k < width; ++k) ga[b * width + k] = g[k];
    tp.accumulate(a, ga);
  });
}

Var reverse_gradient(Var a, double factor) {
  Tape& t = tape_of(a);
  return t.record(a.value(), needs(a), [a, factor](Tape& tp, const Matrix& g) { tp.accumulate(a, factor * g); });
}

Var sum_squares(Var a) {
  Tape& t = tape_of(a);
  double total = 0.0;
  for (double v : a.value().values()) total += v * v;
  return t.record(Matrix(1, 1, total), needs(a),
                  [a](Tape& tp, const Matrix& g) { tp.accumulate(a, (2.0 * g[0]) * a.value()); });
}

Var mse(Var pred, const Matrix& target) {
  Tape& t = tape_of(pred);
  const Matrix& pv = pred.value();
  if (!pv.same_shape(target) || pv.cols() != 1) shape_error("mse", pv, target);
  if (pv.rows() == 0) throw ArgumentError("mse: empty batch");
  const double n = static_cast<double>(pv.rows());
  double total = 0.0;
  for (std::size_t i = 0; i < pv.size(); ++i) total += (pv[i] - target[i]) * (pv[i] - target[i]);
  return t.record(Matrix(1, 1, total / n), needs(pred), [pred, target, n](Tape& tp, const Matrix& g) {
    const Matrix& pv = pred.value();
    Matrix gp(pv.rows(), 1);
    for (std::size_t i = 0; i < pv.size(); ++i) gp[i] = g[0] * 2.0 * (pv[i] - target[i]) / n;
    tp.accumulate(pred, gp);
  });
}

Var cross_entropy(Var probs, std::span<const int> labels, double floor) {
  Tape& t = tape_of(probs);
  const Matrix& pv = probs.value();
  if (labels.size() != pv.rows()) {
    throw DimensionError("cross_entropy: " + std::to_string(labels.size()) + " labels for probabilities " +
                         pv.shape_string());
  }
  if (pv.rows() == 0) throw ArgumentError("cross_entropy: empty batch");
  for (int label : labels) {
    if (label < 0 || static_cast<std::size_t>(label) >= pv.cols()) {
      throw ArgumentError("cross_entropy: label " + std::to_string(label) + " outside [0, " +
                          std::to_string(pv.cols()) + ")");
    }
  }
  const double n = static_cast<double>(pv.rows());
  double total = 0.0;
  for (std::size_t i = 0; i < pv.rows(); ++i) total -= std::log(std::max(pv(i, static_cast<std::size_t>(labels[i])), floor));
  std::vector<int> owned(labels.begin(), labels.end());
  return t.record(Matrix(1, 1, total / n), needs(probs), [probs, owned = std::move(owned), n, floor](Tape& tp, const Matrix& g) {
    const Matrix& pv = probs.value();
    Matrix gp(pv.rows(), pv.cols());
    for (std::size_t i = 0; i < pv.rows(); ++i) {
      const auto c = static_cast<std::size_t>(owned[i]);
      const double p = pv(i, c);
      if (p > floor) gp(i, c) = -g[0] / (n * p);
    }
    tp.accumulate(probs, gp);
  });
}

}  // namespace retain::num
