// SPDX-License-Identifier: Apache-2.0
#pragma once

// RETAIN regression model: linear embedding, two attention RNNs, context
// vector, scalar readout and an adversarial patient classifier on the context.

#include <cstddef>
#include <memory>
#include <nlohmann/json.hpp>
#include <span>
#include <string>
#include <vector>

#include "retain/model.hpp"
#include "retain/num/lstm.hpp"
#include "retain/num/matrix.hpp"
#include "retain/num/params.hpp"
#include "retain/num/tape.hpp"

namespace retain::core {

using num::Matrix;

struct RetainConfig {
  std::size_t seq_len = 37;       // L
  std::size_t input_dim = 3;      // r
  std::size_t embed_dim = 64;     // m
  std::size_t alpha_hidden = 128; // p
  std::size_t beta_hidden = 128;  // q
  std::size_t n_classes = 0;      // K source patients; 0 disables the adversarial head
  bool reverse_time = false;

  /// Throws ConfigurationError unless L >= 2, r >= 1 and m, p, q >= 1.
  void validate() const;
  bool operator==(const RetainConfig&) const = default;
};

nlohmann::json to_json(const RetainConfig& c);
RetainConfig retain_config_from_json(const nlohmann::json& j);

/// Vectors are stored as n x 1 columns and scalars as 1 x 1.
template <class T>
struct RetainWeights {
  T w_emb;                          // m x r
  num::LstmWeights<T> rnn_alpha;    // m -> p
  T w_alpha;                        // p x 1
  T b_alpha;                        // 1 x 1
  num::LstmWeights<T> rnn_beta;     // m -> q
  T w_beta;                         // m x q
  T b_beta;                         // m x 1
  T w_out;                          // m x 1
  T b_out;                          // 1 x 1
  T w_adv;                          // K x m
  T b_adv;                          // K x 1

  template <class U>
  using rebind = RetainWeights<U>;

  template <class Self, class F>
  static void visit(Self& self, F&& f) {
    f("W_emb", self.w_emb);
    num::visit_nested("rnn_alpha", self.rnn_alpha, f);
    f("w_alpha", self.w_alpha);
    f("b_alpha", self.b_alpha);
    num::visit_nested("rnn_beta", self.rnn_beta, f);
    f("W_beta", self.w_beta);
    f("b_beta", self.b_beta);
    f("w_out", self.w_out);
    f("b_out", self.b_out);
    f("W_adv", self.w_adv);
    f("b_adv", self.b_adv);
  }
};

using RetainParams = RetainWeights<Matrix>;

/// Zero-valued parameters shaped by `config`.
RetainParams make_params(const RetainConfig& config);
/// Glorot-uniform weight matrices, zero biases, LSTM forget bias 1.
RetainParams init_params(const RetainConfig& config, num::Rng& rng);
/// Throws DimensionError when any shape disagrees with `config`.
void validate_params(const RetainParams& params, const RetainConfig& config);

struct ForwardTrace {
  Matrix V;          // L x m embeddings
  Matrix E;          // L x 1 pre-softmax scores
  Matrix alphas;     // L x 1
  Matrix betas;      // L x m
  Matrix c;          // m x 1
  double y_hat = 0.0;
  Matrix adv_probs;  // K x 1, empty when K = 0
};

struct ContributionMap {
  Matrix omega;         // L x r
  Matrix coefficients;  // L x r, omega without the input factor
  double bias = 0.0;
};

// Single-window building blocks.
Matrix embed(const Matrix& X, const Matrix& w_emb);
Matrix temporal_attention(const Matrix& V, const num::LstmParams& rnn_alpha, const Matrix& w_alpha, double b_alpha,
                          bool reverse_time = false);
Matrix variable_attention(const Matrix& V, const num::LstmParams& rnn_beta, const Matrix& w_beta,
                          const Matrix& b_beta, bool reverse_time = false);
Matrix context_vector(const Matrix& V, const Matrix& alphas, const Matrix& betas);

/// Tape nodes of one batched pass, kept for inspection.
struct RetainGraph {
  num::Var V;          // LB x m, time-major
  num::Var E;          // B x L
  num::Var alphas;     // B x L
  num::Var betas;      // LB x m
  num::Var c;          // B x m
  num::Var y_hat;      // B x 1
  num::Var adv_probs;  // B x K, invalid when K = 0
};

RetainGraph retain_graph(const RetainWeights<num::Var>& w, const RetainConfig& config,
                         std::span<const num::Var> inputs, double reversal = -1.0);

class RetainModel final : public Model {
 public:
  RetainModel(RetainConfig config, RetainParams params);
  RetainModel(RetainConfig config, num::Rng& rng);

  const RetainConfig& config() const { return config_; }
  const RetainParams& params() const { return params_; }
  RetainParams& params() { return params_; }

  std::string format() const override { return "retain-v1"; }
  std::size_t seq_len() const override { return config_.seq_len; }
  std::size_t input_dim() const override { return config_.input_dim; }
  std::size_t n_classes() const override { return config_.n_classes; }
  std::vector<num::NamedRef<Matrix>> parameters() override;
  std::vector<num::NamedRef<const Matrix>> parameters() const override;
  GraphOutputs graph(num::Tape& tape, const WindowBatch& batch, const GraphOptions& options) const override;
  std::unique_ptr<Model> clone() const override { return std::make_unique<RetainModel>(*this); }
  nlohmann::json config_json() const override { return to_json(config_); }

  static RetainModel from_json(const nlohmann::json& doc);

 private:
  RetainConfig config_;
  RetainParams params_;
};

/// Full trace of one window. Throws ArgumentError on non-finite input.
ForwardTrace forward(const Matrix& X, const RetainParams& params, const RetainConfig& config);
std::vector<ForwardTrace> forward_batch(std::span<const Matrix* const> windows, const RetainParams& params,
                                        const RetainConfig& config);

/// omega[i,j] = alpha_i * w_out . (beta_i * W_emb[:,j]) * x_ij. Throws ConsistencyError on a stale trace.
ContributionMap contributions(const Matrix& X, const ForwardTrace& trace, const RetainParams& params);
/// |omega| / sum |omega|. Throws DegenerateAttributionError when omega is all zero.
Matrix normalized_contributions(const ContributionMap& cmap);

enum class Aggregate { Mean, Max };
Matrix aggregate_attributions(std::span<const Matrix> samples, Aggregate mode);

struct EventOffset {
  std::size_t offset_steps = 0;  // event row is L - 1 - offset_steps
  std::size_t count = 0;
  Matrix mean;                   // mean normalized contribution over those samples
};

struct EventProfile {
  std::vector<EventOffset> offsets;  // only offsets with at least one sample
  std::size_t total = 0;             // number of (sample, offset) matches
};

/// For each offset 0..max_offset_steps, averages `normalized[s]` over samples whose raw window
/// has an event (value > threshold) in `event_column` exactly that many steps before the last row.
EventProfile event_conditioned_attributions(std::span<const Matrix> normalized, std::span<const Matrix> raw_windows,
                                            std::size_t event_column, std::size_t max_offset_steps,
                                            double threshold = 0.0);

/// Mean normalized contribution over windows with no event anywhere in `event_column`.
/// Returns an empty matrix when every window contains an event.
Matrix event_free_background(std::span<const Matrix> normalized, std::span<const Matrix> raw_windows,
                             std::size_t event_column, double threshold = 0.0);

}  // namespace retain::core
