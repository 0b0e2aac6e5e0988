// SPDX-License-Identifier: Apache-2.0
#include "retain/baseline/baselines.hpp"

#include <string>

#include "retain/errors.hpp"
#include "retain/num/tape.hpp"

namespace retain::baseline {

using num::Tape;
using num::Var;

namespace {

template <class Params>
void check_shapes(const Params& have, const Params& want, const std::string& model) {
  const auto a = num::collect<const Matrix>(have);
  const auto b = num::collect<const Matrix>(want);
  for (std::size_t i = 0; i < b.size(); ++i) {
    if (!a[i].ref->same_shape(*b[i].ref)) {
      throw DimensionError(model + " parameter " + b[i].name + " is " + a[i].ref->shape_string() +
                           ", config implies " + b[i].ref->shape_string());
    }
  }
}

void check_input(const WindowBatch& batch, std::size_t input_dim, const std::string& model) {
  if (batch.data.cols() != input_dim) {
    throw DimensionError(model + ": windows have " + std::to_string(batch.data.cols()) +
                         " variables, model expects " + std::to_string(input_dim));
  }
}

Matrix single_row(const Var& v, std::size_t row) { return Matrix::column(v.value().row_span(row)); }

// ---------------------------------------------------------------------------

struct StdAttnGraph {
  Var alphas;  // B x L
  Var y_hat;   // B x 1
};

StdAttnGraph std_attn_graph(const StdAttnWeights<Var>& w, std::span<const Var> inputs) {
  const std::size_t steps = inputs.size();
  const std::size_t batch = inputs.front().rows();
  const auto hs = num::lstm_sequence(inputs, w.rnn, false);
  const Var H = num::concat_rows(hs);
  const Var e_col = num::add_bias(num::matmul(H, w.w_alpha), w.b_alpha);
  StdAttnGraph g;
  g.alphas = num::softmax_rows(num::transpose(num::reshape(e_col, steps, batch)));
  const Var alpha_col = num::reshape(num::transpose(g.alphas), steps * batch, 1);
  const Var c = num::sum_row_blocks(num::scale_rows(H, alpha_col), steps);
  g.y_hat = num::add_bias(num::matmul(c, w.w_out), w.b_out);
  return g;
}

struct LstmRegGraph {
  Var hidden;     // B x h
  Var y_hat;      // B x 1
  Var adv_probs;  // B x K
};

LstmRegGraph lstm_reg_graph(const LstmRegWeights<Var>& w, std::span<const Var> inputs, std::size_t classes,
                            double reversal) {
  const auto h1 = num::lstm_sequence(inputs, w.layer1, false);
  const auto h2 = num::lstm_sequence(h1, w.layer2, false);
  LstmRegGraph g;
  g.hidden = h2.back();
  g.y_hat = num::add_bias(num::matmul(g.hidden, w.w_out), w.b_out);
  if (classes > 0) {
    const Var shared = num::reverse_gradient(g.hidden, reversal);
    g.adv_probs = num::softmax_rows(num::add_bias(num::matmul_nt(shared, w.w_adv), w.b_adv));
  }
  return g;
}

}  // namespace

// ---------------------------------------------------------------------------

void StdAttnConfig::validate() const {
  if (seq_len < 1 || input_dim < 1 || hidden < 1) {
    throw ConfigurationError("StdAttnConfig: seq_len, input_dim and hidden must be positive");
  }
}

StdAttnParams make_std_attn(const StdAttnConfig& config) {
  config.validate();
  return {num::make_lstm(config.input_dim, config.hidden), Matrix(config.hidden, 1), Matrix(1, 1),
          Matrix(config.hidden, 1), Matrix(1, 1)};
}

StdAttnParams init_std_attn(const StdAttnConfig& config, num::Rng& rng) {
  StdAttnParams p = make_std_attn(config);
  p.rnn = num::init_lstm(config.input_dim, config.hidden, rng);
  num::glorot_uniform(p.w_alpha, config.hidden, 1, rng);
  num::glorot_uniform(p.w_out, config.hidden, 1, rng);
  return p;
}

StdAttnResult std_attention_forward(const Matrix& X, const StdAttnParams& params) {
  num::validate_lstm(params.rnn, "std_attention_forward");
  if (X.cols() != num::lstm_input_size(params.rnn)) {
    throw DimensionError("std_attention_forward: input " + X.shape_string() + " for LSTM input size " +
                         std::to_string(num::lstm_input_size(params.rnn)));
  }
  Tape tape;
  const WindowBatch batch = make_batch(std::span<const Matrix>(&X, 1));
  const auto g = std_attn_graph(num::bind_constant(tape, params), timestep_inputs(tape, batch));
  return {g.y_hat.value()[0], single_row(g.alphas, 0)};
}

StdAttnModel::StdAttnModel(StdAttnConfig config, StdAttnParams params) : config_(config), params_(std::move(params)) {
  check_shapes(params_, make_std_attn(config_), "standard attention");
}

StdAttnModel::StdAttnModel(StdAttnConfig config, num::Rng& rng) : config_(config), params_(init_std_attn(config, rng)) {}

std::vector<num::NamedRef<Matrix>> StdAttnModel::parameters() { return num::collect<Matrix>(params_); }

std::vector<num::NamedRef<const Matrix>> StdAttnModel::parameters() const {
  return num::collect<const Matrix>(params_);
}

GraphOutputs StdAttnModel::graph(Tape& tape, const WindowBatch& batch, const GraphOptions& options) const {
  check_input(batch, config_.input_dim, "standard attention");
  const auto bound = options.trainable ? num::bind(tape, params_) : num::bind_constant(tape, params_);
  const auto g = std_attn_graph(bound, timestep_inputs(tape, batch));
  GraphOutputs out;
  for (const auto& r : num::collect<const Var>(bound)) out.params.push_back(*r.ref);
  out.y_hat = g.y_hat;
  return out;
}

nlohmann::json StdAttnModel::config_json() const {
  return {{"seq_len", config_.seq_len}, {"input_dim", config_.input_dim}, {"hidden", config_.hidden}};
}

StdAttnModel StdAttnModel::from_json(const nlohmann::json& doc) {
  const auto& c = doc.at("config");
  const StdAttnConfig config{c.at("seq_len").get<std::size_t>(), c.at("input_dim").get<std::size_t>(),
                             c.at("hidden").get<std::size_t>()};
  StdAttnModel model(config, make_std_attn(config));
  load_parameters(model, doc);
  return model;
}

// ---------------------------------------------------------------------------

void LstmRegConfig::validate() const {
  if (seq_len < 1 || input_dim < 1 || hidden < 1) {
    throw ConfigurationError("LstmRegConfig: seq_len, input_dim and hidden must be positive");
  }
  if (!(l2 >= 0.0)) throw ConfigurationError("LstmRegConfig: l2 must be non-negative");
}

LstmRegParams make_lstm_reg(const LstmRegConfig& config) {
  config.validate();
  const std::size_t h = config.hidden;
  return {num::make_lstm(config.input_dim, h), num::make_lstm(h, h), Matrix(h, 1), Matrix(1, 1),
          Matrix(config.n_classes, h), Matrix(config.n_classes, 1)};
}

LstmRegParams init_lstm_reg(const LstmRegConfig& config, num::Rng& rng) {
  LstmRegParams p = make_lstm_reg(config);
  const std::size_t h = config.hidden;
  p.layer1 = num::init_lstm(config.input_dim, h, rng);
  p.layer2 = num::init_lstm(h, h, rng);
  num::glorot_uniform(p.w_out, h, 1, rng);
  if (config.n_classes > 0) num::glorot_uniform(p.w_adv, h, config.n_classes, rng);
  return p;
}

LstmRegResult lstm_regressor_forward(const Matrix& X, const LstmRegParams& params) {
  num::validate_lstm(params.layer1, "lstm_regressor_forward");
  num::validate_lstm(params.layer2, "lstm_regressor_forward");
  if (X.cols() != num::lstm_input_size(params.layer1)) {
    throw DimensionError("lstm_regressor_forward: input " + X.shape_string() + " for LSTM input size " +
                         std::to_string(num::lstm_input_size(params.layer1)));
  }
  Tape tape;
  const WindowBatch batch = make_batch(std::span<const Matrix>(&X, 1));
  const auto g = lstm_reg_graph(num::bind_constant(tape, params), timestep_inputs(tape, batch), params.w_adv.rows(),
                                -1.0);
  LstmRegResult out{g.y_hat.value()[0], single_row(g.hidden, 0), Matrix{}};
  if (g.adv_probs.valid()) out.adv_probs = single_row(g.adv_probs, 0);
  return out;
}

LstmRegModel::LstmRegModel(LstmRegConfig config, LstmRegParams params) : config_(config), params_(std::move(params)) {
  check_shapes(params_, make_lstm_reg(config_), "LSTM regressor");
}

LstmRegModel::LstmRegModel(LstmRegConfig config, num::Rng& rng) : config_(config), params_(init_lstm_reg(config, rng)) {}

std::vector<num::NamedRef<Matrix>> LstmRegModel::parameters() { return num::collect<Matrix>(params_); }

std::vector<num::NamedRef<const Matrix>> LstmRegModel::parameters() const {
  return num::collect<const Matrix>(params_);
}

GraphOutputs LstmRegModel::graph(Tape& tape, const WindowBatch& batch, const GraphOptions& options) const {
  check_input(batch, config_.input_dim, "LSTM regressor");
  const auto bound = options.trainable ? num::bind(tape, params_) : num::bind_constant(tape, params_);
  const auto g = lstm_reg_graph(bound, timestep_inputs(tape, batch), config_.n_classes, options.reversal);
  GraphOutputs out;
  for (const auto& r : num::collect<const Var>(bound)) out.params.push_back(*r.ref);
  out.y_hat = g.y_hat;
  out.adv_probs = g.adv_probs;
  if (config_.l2 > 0.0) {
    const Var terms[] = {num::sum_squares(bound.layer1.w), num::sum_squares(bound.layer1.u),
                         num::sum_squares(bound.layer2.w), num::sum_squares(bound.layer2.u),
                         num::sum_squares(bound.w_out)};
    out.penalty = num::scale(num::sum(terms), config_.l2);
  }
  return out;
}

nlohmann::json LstmRegModel::config_json() const {
  return {{"seq_len", config_.seq_len}, {"input_dim", config_.input_dim}, {"hidden", config_.hidden},
          {"n_classes", config_.n_classes}, {"l2", config_.l2}};
}

LstmRegModel LstmRegModel::from_json(const nlohmann::json& doc) {
  const auto& c = doc.at("config");
  const LstmRegConfig config{c.at("seq_len").get<std::size_t>(), c.at("input_dim").get<std::size_t>(),
                             c.at("hidden").get<std::size_t>(), c.at("n_classes").get<std::size_t>(),
                             c.at("l2").get<double>()};
  LstmRegModel model(config, make_lstm_reg(config));
  load_parameters(model, doc);
  return model;
}

}  // namespace retain::baseline
