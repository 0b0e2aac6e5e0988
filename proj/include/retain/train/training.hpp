// SPDX-License-Identifier: Apache-2.0
#pragma once

// Loss, gradient reversal, Adam, early stopping and the two-phase
// (pooled source patients, then target finetuning) training protocol.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "retain/model.hpp"
#include "retain/num/matrix.hpp"

namespace retain::train {

using num::Matrix;

struct TrainConfig {
  std::size_t batch_size = 50;
  double lr_source = 1e-3;
  double lr_finetune = 1e-4;
  std::size_t patience_source = 100;
  std::size_t patience_finetune = 25;
  double lambda = 0.0031622776601683794;  // 10^-2.5
  std::size_t max_epochs = 1000;
  std::uint64_t seed = 0;

  /// Throws ConfigurationError on non-positive sizes/rates or negative lambda.
  void validate() const;
};

/// Windows (owned elsewhere) with their targets.
struct Dataset {
  std::vector<const Matrix*> windows;
  std::vector<double> targets;

  std::size_t size() const { return windows.size(); }
  void add(const Matrix& window, double target) {
    windows.push_back(&window);
    targets.push_back(target);
  }
};

struct PatientData {
  Dataset train;
  Dataset valid;
};

/// Batch loss: mean squared error plus lambda times the mean cross-entropy of
/// `labels` under the rows of `probs` (natural log, probabilities floored at 1e-12).
/// `probs` may be empty when lambda is 0.
double loss(std::span<const double> y_true, std::span<const double> y_pred, std::span<const int> labels,
            const Matrix& probs, double lambda);

struct Gradients {
  std::vector<Matrix> grads;  // one per model parameter, in parameters() order
  double mse = 0.0;
  double ce = 0.0;       // 0 when the adversarial term is inactive
  double penalty = 0.0;  // model regularizer, 0 when absent
  double total = 0.0;    // mse + lambda * ce + penalty
};

/// Gradients of mse + lambda * ce + penalty, with the cross-entropy gradient
/// negated where the adversarial head meets the shared representation. The head's
/// own parameters receive +lambda * dCE. With lambda = 0, or a model without an
/// adversarial head, the cross-entropy branch is not evaluated at all.
Gradients backward_with_reversal(const Model& model, std::span<const Matrix* const> windows,
                                 std::span<const double> targets, std::span<const int> labels, double lambda);

struct AdamState {
  std::vector<Matrix> m;
  std::vector<Matrix> v;
  std::uint64_t t = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

AdamState make_adam(const Model& model);
/// One bias-corrected Adam update. Throws TrainingError naming the parameter if any
/// gradient entry is non-finite, and DimensionError on shape mismatch.
void adam_step(std::span<const num::NamedRef<Matrix>> params, std::span<const Matrix> grads, AdamState& state,
               double lr);

struct EarlyStopState {
  double best_loss = std::numeric_limits<double>::infinity();
  std::vector<double> best_params;
  std::size_t best_epoch = 0;
  std::size_t epochs_since_improvement = 0;

  /// Records `valid_loss` for `epoch`; snapshots the model on strict improvement.
  bool update(double valid_loss, const Model& model, std::size_t epoch);
  bool should_stop(std::size_t patience) const { return epochs_since_improvement >= patience; }
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double valid_mse = 0.0;
  double valid_ce = std::numeric_limits<double>::quiet_NaN();  // NaN when not evaluated
  double lr = 0.0;
  std::string phase;
};

struct TrainResult {
  std::vector<EpochRecord> history;
  double initial_valid_mse = 0.0;
  double best_valid_mse = 0.0;
  std::size_t best_epoch = 0;  // 0 means the initial parameters were kept
};

struct ValidationScores {
  double mse = 0.0;
  double ce = std::numeric_limits<double>::quiet_NaN();
};

/// Glucose MSE over `data`, plus the adversarial cross-entropy when `labels` is non-empty.
ValidationScores evaluate_dataset(const Model& model, const Dataset& data, std::span<const int> labels = {});

/// Generic loop without an adversarial term: pooled data, shuffled once per epoch,
/// early stopping on pooled validation MSE. Restores the best snapshot.
TrainResult train_supervised(Model& model, std::span<const PatientData> patients, const TrainConfig& cfg, double lr,
                             std::size_t patience, const std::string& phase);

/// Source phase: pools >= 2 patients, labels samples by patient index and, when the
/// model has an adversarial head, adds the reversed cross-entropy term with cfg.lambda.
TrainResult train_source(Model& model, std::span<const PatientData> sources, const TrainConfig& cfg);

/// Target phase: lambda forced to 0, lr_finetune and patience_finetune.
TrainResult finetune(Model& model, const PatientData& target, const TrainConfig& cfg);

/// CSV with header epoch,train_loss,valid_mse,valid_ce,lr,phase.
void write_history_csv(std::ostream& out, std::span<const EpochRecord> history);

}  // namespace retain::train
