// SPDX-License-Identifier: Apache-2.0
#include "retain/core/retain.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "retain/errors.hpp"

namespace retain::core {

using num::Tape;
using num::Var;

void RetainConfig::validate() const {
  if (seq_len < 2) throw ConfigurationError("RetainConfig: seq_len must be at least 2");
  if (input_dim < 1) throw ConfigurationError("RetainConfig: input_dim must be at least 1");
  if (embed_dim < 1 || alpha_hidden < 1 || beta_hidden < 1) {
    throw ConfigurationError("RetainConfig: embed_dim, alpha_hidden and beta_hidden must be at least 1");
  }
}

nlohmann::json to_json(const RetainConfig& c) {
  return {{"seq_len", c.seq_len},           {"input_dim", c.input_dim},       {"embed_dim", c.embed_dim},
          {"alpha_hidden", c.alpha_hidden}, {"beta_hidden", c.beta_hidden},   {"n_classes", c.n_classes},
          {"reverse_time", c.reverse_time}};
}

RetainConfig retain_config_from_json(const nlohmann::json& j) {
  RetainConfig c;
  c.seq_len = j.at("seq_len").get<std::size_t>();
  c.input_dim = j.at("input_dim").get<std::size_t>();
  c.embed_dim = j.at("embed_dim").get<std::size_t>();
  c.alpha_hidden = j.at("alpha_hidden").get<std::size_t>();
  c.beta_hidden = j.at("beta_hidden").get<std::size_t>();
  c.n_classes = j.at("n_classes").get<std::size_t>();
  c.reverse_time = j.at("reverse_time").get<bool>();
  c.validate();
  return c;
}

RetainParams make_params(const RetainConfig& config) {
  config.validate();
  const std::size_t m = config.embed_dim;
  const std::size_t k = config.n_classes;
  return RetainParams{Matrix(m, config.input_dim),
                      num::make_lstm(m, config.alpha_hidden),
                      Matrix(config.alpha_hidden, 1),
                      Matrix(1, 1),
                      num::make_lstm(m, config.beta_hidden),
                      Matrix(m, config.beta_hidden),
                      Matrix(m, 1),
                      Matrix(m, 1),
                      Matrix(1, 1),
                      Matrix(k, m),
                      Matrix(k, 1)};
}

RetainParams init_params(const RetainConfig& config, num::Rng& rng) {
  RetainParams p = make_params(config);
  const std::size_t m = config.embed_dim;
  num::glorot_uniform(p.w_emb, config.input_dim, m, rng);
  p.rnn_alpha = num::init_lstm(m, config.alpha_hidden, rng);
  num::glorot_uniform(p.w_alpha, config.alpha_hidden, 1, rng);
  p.rnn_beta = num::init_lstm(m, config.beta_hidden, rng);
  num::glorot_uniform(p.w_beta, config.beta_hidden, m, rng);
  num::glorot_uniform(p.w_out, m, 1, rng);
  if (config.n_classes > 0) num::glorot_uniform(p.w_adv, m, config.n_classes, rng);
  return p;
}

void validate_params(const RetainParams& params, const RetainConfig& config) {
  const RetainParams expected = make_params(config);
  const auto have = num::collect<const Matrix>(params);
  const auto want = num::collect<const Matrix>(expected);
  for (std::size_t i = 0; i < want.size(); ++i) {
    if (!have[i].ref->same_shape(*want[i].ref)) {
      throw DimensionError("RETAIN parameter " + want[i].name + " is " + have[i].ref->shape_string() +
                           ", config implies " + want[i].ref->shape_string());
    }
  }
}

Matrix embed(const Matrix& X, const Matrix& w_emb) {
  if (X.cols() != w_emb.cols()) {
    throw DimensionError("embed: input " + X.shape_string() + " does not match W_emb " + w_emb.shape_string());
  }
  return num::matmul_nt(X, w_emb);
}

Matrix temporal_attention(const Matrix& V, const num::LstmParams& rnn_alpha, const Matrix& w_alpha, double b_alpha,
                          bool reverse_time) {
  const Matrix G = num::lstm_forward(V, rnn_alpha, reverse_time);
  Matrix e = num::matmul(G, w_alpha);
  for (double& v : e.values()) v += b_alpha;
  return Matrix::column(num::softmax(e.values()));
}

Matrix variable_attention(const Matrix& V, const num::LstmParams& rnn_beta, const Matrix& w_beta,
                          const Matrix& b_beta, bool reverse_time) {
  const Matrix H = num::lstm_forward(V, rnn_beta, reverse_time);
  Matrix out = num::matmul_nt(H, w_beta);
  if (b_beta.size() != out.cols()) {
    throw DimensionError("variable_attention: b_beta " + b_beta.shape_string() + " for W_beta " +
                         w_beta.shape_string());
  }
  for (std::size_t i = 0; i < out.rows(); ++i)
    for (std::size_t k = 0; k < out.cols(); ++k) out(i, k) = num::tanh_bounded(out(i, k) + b_beta[k]);
  return out;
}

Matrix context_vector(const Matrix& V, const Matrix& alphas, const Matrix& betas) {
  if (!V.same_shape(betas) || alphas.size() != V.rows()) {
    throw DimensionError("context_vector: V " + V.shape_string() + ", alphas " + alphas.shape_string() +
                         ", betas " + betas.shape_string());
  }
  Matrix c(V.cols(), 1);
  for (std::size_t i = 0; i < V.rows(); ++i)
    for (std::size_t k = 0; k < V.cols(); ++k) c[k] += alphas[i] * betas(i, k) * V(i, k);
  return c;
}

RetainGraph retain_graph(const RetainWeights<Var>& w, const RetainConfig& config, std::span<const Var> inputs,
                         double reversal) {
  if (inputs.empty()) throw ArgumentError("retain_graph: empty window");
  const std::size_t steps = inputs.size();
  const std::size_t batch = inputs.front().rows();

  RetainGraph g;
  g.V = num::matmul_nt(num::concat_rows(inputs), w.w_emb);
  std::vector<Var> vs;
  vs.reserve(steps);
  for (std::size_t t = 0; t < steps; ++t) vs.push_back(num::slice_rows(g.V, t * batch, batch));

  const auto gs = num::lstm_sequence(vs, w.rnn_alpha, config.reverse_time);
  const Var e_col = num::add_bias(num::matmul(num::concat_rows(gs), w.w_alpha), w.b_alpha);
  g.E = num::transpose(num::reshape(e_col, steps, batch));
  g.alphas = num::softmax_rows(g.E);
  const Var alpha_col = num::reshape(num::transpose(g.alphas), steps * batch, 1);

  const auto hs = num::lstm_sequence(vs, w.rnn_beta, config.reverse_time);
  g.betas = num::tanh(num::add_bias(num::matmul_nt(num::concat_rows(hs), w.w_beta), w.b_beta));

  g.c = num::sum_row_blocks(num::scale_rows(num::mul(g.betas, g.V), alpha_col), steps);
  g.y_hat = num::add_bias(num::matmul(g.c, w.w_out), w.b_out);
  if (config.n_classes > 0) {
    const Var shared = num::reverse_gradient(g.c, reversal);
    g.adv_probs = num::softmax_rows(num::add_bias(num::matmul_nt(shared, w.w_adv), w.b_adv));
  }
  return g;
}

RetainModel::RetainModel(RetainConfig config, RetainParams params)
    : config_(config), params_(std::move(params)) {
  config_.validate();
  validate_params(params_, config_);
}

RetainModel::RetainModel(RetainConfig config, num::Rng& rng)
    : config_(config), params_(init_params(config, rng)) {}

std::vector<num::NamedRef<Matrix>> RetainModel::parameters() { return num::collect<Matrix>(params_); }

std::vector<num::NamedRef<const Matrix>> RetainModel::parameters() const {
  return num::collect<const Matrix>(params_);
}

GraphOutputs RetainModel::graph(Tape& tape, const WindowBatch& batch, const GraphOptions& options) const {
  if (batch.data.cols() != config_.input_dim) {
    throw DimensionError("RETAIN: windows have " + std::to_string(batch.data.cols()) + " variables, model expects " +
                         std::to_string(config_.input_dim));
  }
  const auto bound = options.trainable ? num::bind(tape, params_) : num::bind_constant(tape, params_);
  const auto xs = timestep_inputs(tape, batch);
  const RetainGraph g = retain_graph(bound, config_, xs, options.reversal);
  GraphOutputs out;
  for (const auto& r : num::collect<const Var>(bound)) out.params.push_back(*r.ref);
  out.y_hat = g.y_hat;
  out.adv_probs = g.adv_probs;
  return out;
}

RetainModel RetainModel::from_json(const nlohmann::json& doc) {
  const RetainConfig config = retain_config_from_json(doc.at("config"));
  RetainModel model(config, make_params(config));
  load_parameters(model, doc);
  return model;
}

namespace {

void check_window(const Matrix& X, const RetainConfig& config) {
  if (X.rows() != config.seq_len || X.cols() != config.input_dim) {
    throw DimensionError("RETAIN: window " + X.shape_string() + " but config expects (" +
                         std::to_string(config.seq_len) + "x" + std::to_string(config.input_dim) + ")");
  }
  if (!X.all_finite()) throw ArgumentError("RETAIN: window contains non-finite values");
}

}  // namespace

std::vector<ForwardTrace> forward_batch(std::span<const Matrix* const> windows, const RetainParams& params,
                                        const RetainConfig& config) {
  config.validate();
  validate_params(params, config);
  for (const Matrix* w : windows) check_window(*w, config);
  if (windows.empty()) return {};

  Tape tape;
  const WindowBatch batch = make_batch(windows);
  const auto xs = timestep_inputs(tape, batch);
  const RetainGraph g = retain_graph(num::bind_constant(tape, params), config, xs);

  const std::size_t steps = config.seq_len;
  const std::size_t m = config.embed_dim;
  const std::size_t n = windows.size();
  std::vector<ForwardTrace> out(n);
  for (std::size_t b = 0; b < n; ++b) {
    ForwardTrace& tr = out[b];
    tr.V = Matrix(steps, m);
    tr.betas = Matrix(steps, m);
    tr.E = Matrix(steps, 1);
    tr.alphas = Matrix(steps, 1);
    for (std::size_t t = 0; t < steps; ++t) {
      const auto v = g.V.value().row_span(t * n + b);
      const auto be = g.betas.value().row_span(t * n + b);
      std::copy(v.begin(), v.end(), tr.V.row_span(t).begin());
      std::copy(be.begin(), be.end(), tr.betas.row_span(t).begin());
      tr.E[t] = g.E.value()(b, t);
      tr.alphas[t] = g.alphas.value()(b, t);
    }
    tr.c = Matrix::column(g.c.value().row_span(b));
    tr.y_hat = g.y_hat.value()[b];
    if (g.adv_probs.valid()) tr.adv_probs = Matrix::column(g.adv_probs.value().row_span(b));
  }
  return out;
}

ForwardTrace forward(const Matrix& X, const RetainParams& params, const RetainConfig& config) {
  const Matrix* one[] = {&X};
  return std::move(forward_batch(one, params, config).front());
}

ContributionMap contributions(const Matrix& X, const ForwardTrace& trace, const RetainParams& params) {
  const Matrix& w = params.w_emb;
  const std::size_t steps = X.rows();
  const std::size_t m = w.rows();
  if (X.cols() != w.cols() || trace.V.rows() != steps || trace.V.cols() != m || !trace.betas.same_shape(trace.V) ||
      trace.alphas.size() != steps || params.w_out.size() != m) {
    throw ConsistencyError("contributions: trace V" + trace.V.shape_string() + " betas" +
                           trace.betas.shape_string() + " does not belong to input " + X.shape_string() +
                           " with W_emb " + w.shape_string());
  }
  ContributionMap out{Matrix(steps, X.cols()), Matrix(steps, X.cols()), params.b_out[0]};
  for (std::size_t i = 0; i < steps; ++i) {
    for (std::size_t j = 0; j < X.cols(); ++j) {
      double dot = 0.0;
      for (std::size_t k = 0; k < m; ++k) dot += params.w_out[k] * trace.betas(i, k) * w(k, j);
      out.coefficients(i, j) = trace.alphas[i] * dot;
      out.omega(i, j) = out.coefficients(i, j) * X(i, j);
    }
  }
  return out;
}

Matrix normalized_contributions(const ContributionMap& cmap) {
  double total = 0.0;
  for (double v : cmap.omega.values()) total += std::abs(v);
  if (!(total > 0.0)) throw DegenerateAttributionError("normalized_contributions: every contribution is zero");
  Matrix out(cmap.omega.rows(), cmap.omega.cols());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = std::abs(cmap.omega[k]) / total;
  return out;
}

Matrix aggregate_attributions(std::span<const Matrix> samples, Aggregate mode) {
  if (samples.empty()) throw ArgumentError("aggregate_attributions: no samples");
  Matrix out = samples.front();
  for (std::size_t s = 1; s < samples.size(); ++s) {
    const Matrix& m = samples[s];
    if (!m.same_shape(out)) {
      throw DimensionError("aggregate_attributions: sample " + m.shape_string() + " differs from " +
                           out.shape_string());
    }
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = mode == Aggregate::Max ? std::max(out[k], m[k]) : out[k] + m[k];
  }
  if (mode == Aggregate::Mean) out *= 1.0 / static_cast<double>(samples.size());
  return out;
}

namespace {

void check_event_inputs(std::span<const Matrix> normalized, std::span<const Matrix> raw_windows,
                        std::size_t event_column) {
  if (normalized.size() != raw_windows.size()) {
    throw DimensionError("event attributions: " + std::to_string(normalized.size()) + " maps for " +
                         std::to_string(raw_windows.size()) + " windows");
  }
  for (std::size_t s = 0; s < raw_windows.size(); ++s) {
    if (event_column >= raw_windows[s].cols()) throw ArgumentError("event attributions: event column out of range");
    if (!normalized[s].same_shape(raw_windows[s])) {
      throw DimensionError("event attributions: map " + normalized[s].shape_string() + " for window " +
                           raw_windows[s].shape_string());
    }
  }
}

}  // namespace

EventProfile event_conditioned_attributions(std::span<const Matrix> normalized, std::span<const Matrix> raw_windows,
                                            std::size_t event_column, std::size_t max_offset_steps,
                                            double threshold) {
  check_event_inputs(normalized, raw_windows, event_column);
  EventProfile profile;
  if (raw_windows.empty()) return profile;
  const std::size_t steps = raw_windows.front().rows();
  const std::size_t last = std::min(max_offset_steps, steps - 1);
  for (std::size_t k = 0; k <= last; ++k) {
    std::vector<Matrix> hits;
    for (std::size_t s = 0; s < raw_windows.size(); ++s) {
      if (raw_windows[s].rows() != steps) throw DimensionError("event attributions: windows differ in length");
      if (raw_windows[s](steps - 1 - k, event_column) > threshold) hits.push_back(normalized[s]);
    }
    if (hits.empty()) continue;
    profile.total += hits.size();
    profile.offsets.push_back({k, hits.size(), aggregate_attributions(hits, Aggregate::Mean)});
  }
  return profile;
}

Matrix event_free_background(std::span<const Matrix> normalized, std::span<const Matrix> raw_windows,
                             std::size_t event_column, double threshold) {
  check_event_inputs(normalized, raw_windows, event_column);
  std::vector<Matrix> quiet;
  for (std::size_t s = 0; s < raw_windows.size(); ++s) {
    bool any = false;
    for (std::size_t t = 0; t < raw_windows[s].rows() && !any; ++t) any = raw_windows[s](t, event_column) > threshold;
    if (!any) quiet.push_back(normalized[s]);
  }
  if (quiet.empty()) return Matrix{};
  return aggregate_attributions(quiet, Aggregate::Mean);
}

}  // namespace retain::core
