// SPDX-License-Identifier: Apache-2.0
#pragma once

// Reference forecasters: a single-level attention RNN and a stacked LSTM regressor.

#include <cstddef>
#include <memory>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "retain/model.hpp"
#include "retain/num/lstm.hpp"
#include "retain/num/matrix.hpp"
#include "retain/num/params.hpp"

namespace retain::baseline {

using num::Matrix;

// ---------------------------------------------------------------------------
// Standard attention: h = RNN(x), alpha = softmax(w_alpha . h_i + b_alpha),
// c = sum alpha_i h_i, y = w_out . c + b_out.

struct StdAttnConfig {
  std::size_t seq_len = 37;
  std::size_t input_dim = 3;
  std::size_t hidden = 128;

  void validate() const;
  bool operator==(const StdAttnConfig&) const = default;
};

template <class T>
struct StdAttnWeights {
  num::LstmWeights<T> rnn;  // r -> p
  T w_alpha;                // p x 1
  T b_alpha;                // 1 x 1
  T w_out;                  // p x 1
  T b_out;                  // 1 x 1

  template <class U>
  using rebind = StdAttnWeights<U>;

  template <class Self, class F>
  static void visit(Self& self, F&& f) {
    num::visit_nested("rnn", self.rnn, f);
    f("w_alpha", self.w_alpha);
    f("b_alpha", self.b_alpha);
    f("w_out", self.w_out);
    f("b_out", self.b_out);
  }
};

using StdAttnParams = StdAttnWeights<Matrix>;

StdAttnParams make_std_attn(const StdAttnConfig& config);
StdAttnParams init_std_attn(const StdAttnConfig& config, num::Rng& rng);

struct StdAttnResult {
  double y_hat = 0.0;
  Matrix alphas;  // L x 1
};

StdAttnResult std_attention_forward(const Matrix& X, const StdAttnParams& params);

class StdAttnModel final : public Model {
 public:
  StdAttnModel(StdAttnConfig config, StdAttnParams params);
  StdAttnModel(StdAttnConfig config, num::Rng& rng);

  const StdAttnConfig& config() const { return config_; }
  const StdAttnParams& params() const { return params_; }
  StdAttnParams& params() { return params_; }

  std::string format() const override { return "stdattn-v1"; }
  std::size_t seq_len() const override { return config_.seq_len; }
  std::size_t input_dim() const override { return config_.input_dim; }
  std::size_t n_classes() const override { return 0; }
  std::vector<num::NamedRef<Matrix>> parameters() override;
  std::vector<num::NamedRef<const Matrix>> parameters() const override;
  GraphOutputs graph(num::Tape& tape, const WindowBatch& batch, const GraphOptions& options) const override;
  std::unique_ptr<Model> clone() const override { return std::make_unique<StdAttnModel>(*this); }
  nlohmann::json config_json() const override;

  static StdAttnModel from_json(const nlohmann::json& doc);

 private:
  StdAttnConfig config_;
  StdAttnParams params_;
};

// ---------------------------------------------------------------------------
// Stacked LSTM regressor: two LSTM layers, the last hidden state of the second
// feeds a scalar readout and an adversarial patient classifier.

struct LstmRegConfig {
  std::size_t seq_len = 37;
  std::size_t input_dim = 3;
  std::size_t hidden = 256;
  std::size_t n_classes = 0;
  /// Coefficient of the squared-norm penalty on LSTM kernels and the readout weights.
  double l2 = 1e-4;

  void validate() const;
  bool operator==(const LstmRegConfig&) const = default;
};

template <class T>
struct LstmRegWeights {
  num::LstmWeights<T> layer1;  // r -> h
  num::LstmWeights<T> layer2;  // h -> h
  T w_out;                     // h x 1
  T b_out;                     // 1 x 1
  T w_adv;                     // K x h
  T b_adv;                     // K x 1

  template <class U>
  using rebind = LstmRegWeights<U>;

  template <class Self, class F>
  static void visit(Self& self, F&& f) {
    num::visit_nested("layer1", self.layer1, f);
    num::visit_nested("layer2", self.layer2, f);
    f("w_out", self.w_out);
    f("b_out", self.b_out);
    f("W_adv", self.w_adv);
    f("b_adv", self.b_adv);
  }
};

using LstmRegParams = LstmRegWeights<Matrix>;

LstmRegParams make_lstm_reg(const LstmRegConfig& config);
LstmRegParams init_lstm_reg(const LstmRegConfig& config, num::Rng& rng);

struct LstmRegResult {
  double y_hat = 0.0;
  Matrix hidden;     // h x 1, last hidden state of layer 2
  Matrix adv_probs;  // K x 1, empty when K = 0
};

LstmRegResult lstm_regressor_forward(const Matrix& X, const LstmRegParams& params);

class LstmRegModel final : public Model {
 public:
  LstmRegModel(LstmRegConfig config, LstmRegParams params);
  LstmRegModel(LstmRegConfig config, num::Rng& rng);

  const LstmRegConfig& config() const { return config_; }
  const LstmRegParams& params() const { return params_; }
  LstmRegParams& params() { return params_; }

  std::string format() const override { return "lstmreg-v1"; }
  std::size_t seq_len() const override { return config_.seq_len; }
  std::size_t input_dim() const override { return config_.input_dim; }
  std::size_t n_classes() const override { return config_.n_classes; }
  std::vector<num::NamedRef<Matrix>> parameters() override;
  std::vector<num::NamedRef<const Matrix>> parameters() const override;
  GraphOutputs graph(num::Tape& tape, const WindowBatch& batch, const GraphOptions& options) const override;
  std::unique_ptr<Model> clone() const override { return std::make_unique<LstmRegModel>(*this); }
  nlohmann::json config_json() const override;

  static LstmRegModel from_json(const nlohmann::json& doc);

 private:
  LstmRegConfig config_;
  LstmRegParams params_;
};

}  // namespace retain::baseline
