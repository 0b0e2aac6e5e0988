// SPDX-License-Identifier: Apache-2.0
#include "retain/num/lstm.hpp"

#include <cmath>

#include "retain/errors.hpp"

namespace retain::num {

void glorot_uniform(Matrix& m, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (double& v : m.values()) v = dist(rng);
}

LstmParams make_lstm(std::size_t input_size, std::size_t hidden_size) {
  return LstmParams{Matrix(4 * hidden_size, input_size), Matrix(4 * hidden_size, hidden_size),
                    Matrix(4 * hidden_size, 1)};
}

LstmParams init_lstm(std::size_t input_size, std::size_t hidden_size, Rng& rng) {
  LstmParams p = make_lstm(input_size, hidden_size);
  glorot_uniform(p.w, input_size, 4 * hidden_size, rng);
  glorot_uniform(p.u, hidden_size, 4 * hidden_size, rng);
  for (std::size_t k = hidden_size; k < 2 * hidden_size; ++k) p.b[k] = 1.0;
  return p;
}

std::size_t lstm_input_size(const LstmParams& p) { return p.w.cols(); }
std::size_t lstm_hidden_size(const LstmParams& p) { return p.u.cols(); }

void validate_lstm(const LstmParams& p, const std::string& name) {
  const std::size_t h = p.u.cols();
  if (h == 0 || p.u.rows() != 4 * h || p.w.rows() != 4 * h || p.b.size() != 4 * h) {
    throw DimensionError(name + ": inconsistent LSTM shapes w" + p.w.shape_string() + " u" + p.u.shape_string() +
                         " b" + p.b.shape_string());
  }
}

std::vector<Var> lstm_sequence(std::span<const Var> inputs, const LstmWeights<Var>& weights, bool reverse_time) {
  if (inputs.empty()) throw ArgumentError("lstm_sequence: empty sequence");
  const std::size_t hidden = weights.u.cols();
  const std::size_t in = weights.w.cols();
  const std::size_t batch = inputs.front().rows();
  for (const Var& x : inputs) {
    if (x.cols() != in || x.rows() != batch) {
      throw DimensionError("lstm_sequence: input " + x.value().shape_string() + " does not match input_size " +
                           std::to_string(in));
    }
  }
  Tape& tape = inputs.front().tape();

  // One large input projection for every timestep, sliced per step below.
  const Var projected = matmul_nt(concat_rows(inputs), weights.w);

  Var h = tape.constant(Matrix(batch, hidden));
  Var c = tape.constant(Matrix(batch, hidden));
  std::vector<Var> outputs(inputs.size());
  const std::size_t steps = inputs.size();
  for (std::size_t k = 0; k < steps; ++k) {
    const std::size_t t = reverse_time ? steps - 1 - k : k;
    const Var z = add_bias(add(slice_rows(projected, t * batch, batch), matmul_nt(h, weights.u)), weights.b);
    const Var gate_in = sigmoid(slice_cols(z, 0, hidden));
    const Var gate_forget = sigmoid(slice_cols(z, hidden, hidden));
    const Var candidate = tanh(slice_cols(z, 2 * hidden, hidden));
    const Var gate_out = sigmoid(slice_cols(z, 3 * hidden, hidden));
    c = add(mul(gate_forget, c), mul(gate_in, candidate));
    h = mul(gate_out, tanh(c));
    outputs[t] = h;
  }
  return outputs;
}

Matrix lstm_forward(const Matrix& inputs, const LstmParams& params, bool reverse_time) {
  validate_lstm(params, "lstm_forward");
  if (inputs.rows() == 0) throw ArgumentError("lstm_forward: empty sequence");
  if (inputs.cols() != lstm_input_size(params)) {
    throw DimensionError("lstm_forward: inputs " + inputs.shape_string() + " but input_size " +
                         std::to_string(lstm_input_size(params)));
  }
  Tape tape;
  const auto weights = bind_constant(tape, params);
  std::vector<Var> xs;
  xs.reserve(inputs.rows());
  for (std::size_t t = 0; t < inputs.rows(); ++t) xs.push_back(tape.constant(Matrix::row(inputs.row_span(t))));
  const auto hs = lstm_sequence(xs, weights, reverse_time);
  Matrix out(inputs.rows(), lstm_hidden_size(params));
  for (std::size_t t = 0; t < hs.size(); ++t) {
    const auto row = hs[t].value().row_span(0);
    std::copy(row.begin(), row.end(), out.row_span(t).begin());
  }
  return out;
}

}  // namespace retain::num
