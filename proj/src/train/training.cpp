// SPDX-License-Identifier: Apache-2.0
#include "retain/train/training.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cstdio>
#include <numeric>

#include "retain/errors.hpp"
#include "retain/num/tape.hpp"

namespace retain::train {

using num::Tape;
using num::Var;

void TrainConfig::validate() const {
  if (batch_size == 0) throw ConfigurationError("TrainConfig: batch_size must be positive");
  if (!(lr_source > 0.0) || !(lr_finetune > 0.0)) throw ConfigurationError("TrainConfig: learning rates must be positive");
  if (patience_source == 0 || patience_finetune == 0) throw ConfigurationError("TrainConfig: patience must be positive");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigurationError("TrainConfig: lambda must be finite and >= 0");
}

double loss(std::span<const double> y_true, std::span<const double> y_pred, std::span<const int> labels,
            const Matrix& probs, double lambda) {
  if (y_true.empty()) throw ArgumentError("loss: empty batch");
  if (y_true.size() != y_pred.size()) throw DimensionError("loss: prediction count differs from target count");
  double mse = 0.0;
  for (std::size_t i = 0; i < y_true.size(); ++i) mse += (y_pred[i] - y_true[i]) * (y_pred[i] - y_true[i]);
  mse /= static_cast<double>(y_true.size());
  if (probs.empty()) {
    if (lambda != 0.0) throw ArgumentError("loss: class probabilities required when lambda > 0");
    return mse;
  }
  if (labels.size() != probs.rows()) throw DimensionError("loss: label count differs from probability rows");
  double ce = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= probs.cols()) {
      throw ArgumentError("loss: label " + std::to_string(labels[i]) + " outside [0, " + std::to_string(probs.cols()) +
                          ")");
    }
    ce -= std::log(std::max(probs(i, static_cast<std::size_t>(labels[i])), 1e-12));
  }
  return mse + lambda * ce / static_cast<double>(labels.size());
}

Gradients backward_with_reversal(const Model& model, std::span<const Matrix* const> windows,
                                 std::span<const double> targets, std::span<const int> labels, double lambda) {
  if (windows.size() != targets.size()) throw DimensionError("backward_with_reversal: window and target counts differ");
  Tape tape;
  const WindowBatch batch = make_batch(windows);
  const GraphOutputs out = model.graph(tape, batch, GraphOptions{.trainable = true, .reversal = -1.0});
  const Var mse = num::mse(out.y_hat, Matrix::column(targets));
  std::vector<Var> terms{mse};
  Gradients g;
  if (lambda > 0.0 && out.adv_probs.valid()) {
    const Var ce = num::cross_entropy(out.adv_probs, labels);
    terms.push_back(num::scale(ce, lambda));
    g.ce = ce.value()[0];
  }
  if (out.penalty.valid()) {
    terms.push_back(out.penalty);
    g.penalty = out.penalty.value()[0];
  }
  const Var total = num::sum(terms);
  tape.backward(total);
  g.mse = mse.value()[0];
  g.total = total.value()[0];
  g.grads.reserve(out.params.size());
  for (const Var& p : out.params) g.grads.push_back(tape.grad(p));
  return g;
}

AdamState make_adam(const Model& model) {
  AdamState s;
  for (const auto& p : model.parameters()) {
    s.m.emplace_back(p.ref->rows(), p.ref->cols());
    s.v.emplace_back(p.ref->rows(), p.ref->cols());
  }
  return s;
}

void adam_step(std::span<const num::NamedRef<Matrix>> params, std::span<const Matrix> grads, AdamState& state,
               double lr) {
  if (params.size() != grads.size() || state.m.size() != params.size() || state.v.size() != params.size()) {
    throw DimensionError("adam_step: parameter, gradient and state counts differ");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!grads[i].same_shape(*params[i].ref) || !state.m[i].same_shape(grads[i])) {
      throw DimensionError("adam_step: gradient " + grads[i].shape_string() + " for parameter " + params[i].name +
                           " " + params[i].ref->shape_string());
    }
    if (!grads[i].all_finite()) throw TrainingError("adam_step: non-finite gradient for parameter " + params[i].name);
  }
  ++state.t;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i].ref->values();
    auto m = state.m[i].values();
    auto v = state.v[i].values();
    const auto g = grads[i].values();
    for (std::size_t k = 0; k < p.size(); ++k) {
      m[k] = state.beta1 * m[k] + (1.0 - state.beta1) * g[k];
      v[k] = state.beta2 * v[k] + (1.0 - state.beta2) * g[k] * g[k];
      const double m_hat = m[k] / bc1;
      const double v_hat = v[k] / bc2;
      p[k] -= lr * m_hat / (std::sqrt(v_hat) + state.eps);
    }
  }
}

bool EarlyStopState::update(double valid_loss, const Model& model, std::size_t epoch) {
  if (valid_loss < best_loss) {
    best_loss = valid_loss;
    best_params = flatten_parameters(model);
    best_epoch = epoch;
    epochs_since_improvement = 0;
    return true;
  }
  ++epochs_since_improvement;
  return false;
}

ValidationScores evaluate_dataset(const Model& model, const Dataset& data, std::span<const int> labels) {
  if (data.size() == 0) throw ArgumentError("evaluate_dataset: empty dataset");
  if (!labels.empty() && labels.size() != data.size()) throw DimensionError("evaluate_dataset: label count mismatch");
  constexpr std::size_t kBatch = 256;
  double se = 0.0;
  double ce = 0.0;
  bool have_ce = false;
  for (std::size_t start = 0; start < data.size(); start += kBatch) {
    const std::size_t n = std::min(kBatch, data.size() - start);
    Tape tape;
    const auto out = model.graph(tape, make_batch(std::span(data.windows).subspan(start, n)), GraphOptions{});
    const Matrix& y = out.y_hat.value();
    for (std::size_t i = 0; i < n; ++i) se += (y[i] - data.targets[start + i]) * (y[i] - data.targets[start + i]);
    if (!labels.empty() && out.adv_probs.valid()) {
      const Matrix& p = out.adv_probs.value();
      for (std::size_t i = 0; i < n; ++i) {
        const int label = labels[start + i];
        if (label < 0 || static_cast<std::size_t>(label) >= p.cols()) {
          throw ArgumentError("evaluate_dataset: label " + std::to_string(label) + " out of range");
        }
        ce -= std::log(std::max(p(i, static_cast<std::size_t>(label)), 1e-12));
      }
      have_ce = true;
    }
  }
  const double n = static_cast<double>(data.size());
  ValidationScores s;
  s.mse = se / n;
  if (have_ce) s.ce = ce / n;
  return s;
}

namespace {

struct Pooled {
  Dataset train;
  Dataset valid;
  std::vector<int> train_labels;
  std::vector<int> valid_labels;
};

Pooled pool(std::span<const PatientData> patients) {
  Pooled p;
  for (std::size_t k = 0; k < patients.size(); ++k) {
    const auto& d = patients[k];
    if (d.train.windows.size() != d.train.targets.size() || d.valid.windows.size() != d.valid.targets.size()) {
      throw DimensionError("training data: window and target counts differ for patient " + std::to_string(k));
    }
    p.train.windows.insert(p.train.windows.end(), d.train.windows.begin(), d.train.windows.end());
    p.train.targets.insert(p.train.targets.end(), d.train.targets.begin(), d.train.targets.end());
    p.train_labels.insert(p.train_labels.end(), d.train.size(), static_cast<int>(k));
    p.valid.windows.insert(p.valid.windows.end(), d.valid.windows.begin(), d.valid.windows.end());
    p.valid.targets.insert(p.valid.targets.end(), d.valid.targets.begin(), d.valid.targets.end());
    p.valid_labels.insert(p.valid_labels.end(), d.valid.size(), static_cast<int>(k));
  }
  return p;
}

TrainResult run_phase(Model& model, const Pooled& data, const TrainConfig& cfg, double lr, std::size_t patience,
                      double lambda, const std::string& phase) {
  cfg.validate();
  if (data.train.size() == 0 || data.valid.size() == 0) {
    throw ArgumentError(phase + ": training and validation data must be non-empty");
  }
  const bool adversarial = lambda > 0.0 && model.n_classes() > 0;
  const std::span<const int> valid_labels = adversarial ? std::span<const int>(data.valid_labels) : std::span<const int>{};

  TrainResult result;
  EarlyStopState stop;
  const ValidationScores initial = evaluate_dataset(model, data.valid, valid_labels);
  if (!std::isfinite(initial.mse)) throw TrainingError(phase + ": non-finite validation MSE before training");
  result.initial_valid_mse = initial.mse;
  stop.update(initial.mse, model, 0);

  AdamState adam = make_adam(model);
  const auto params = model.parameters();
  num::Rng rng(cfg.seed);
  std::vector<std::size_t> order(data.train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<const Matrix*> windows;
  std::vector<double> targets;
  std::vector<int> labels;

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t n = std::min(cfg.batch_size, order.size() - start);
      windows.clear();
      targets.clear();
      labels.clear();
      for (std::size_t i = start; i < start + n; ++i) {
        windows.push_back(data.train.windows[order[i]]);
        targets.push_back(data.train.targets[order[i]]);
        labels.push_back(data.train_labels[order[i]]);
      }
      const Gradients g = backward_with_reversal(model, windows, targets, labels, adversarial ? lambda : 0.0);
      if (!std::isfinite(g.total)) {
        throw TrainingError(phase + ": loss diverged at epoch " + std::to_string(epoch));
      }
      adam_step(params, g.grads, adam, lr);
      loss_sum += g.total * static_cast<double>(n);
    }
    const ValidationScores scores = evaluate_dataset(model, data.valid, valid_labels);
    if (!std::isfinite(scores.mse)) {
      throw TrainingError(phase + ": validation MSE diverged at epoch " + std::to_string(epoch));
    }
    result.history.push_back(
        {epoch, loss_sum / static_cast<double>(order.size()), scores.mse, scores.ce, lr, phase});
    spdlog::debug("{} epoch {}: train {:.6g} valid_mse {:.6g}", phase, epoch, result.history.back().train_loss,
                  scores.mse);
    stop.update(scores.mse, model, epoch);
    if (stop.should_stop(patience)) break;
  }
  assign_parameters(model, stop.best_params);
  result.best_valid_mse = stop.best_loss;
  result.best_epoch = stop.best_epoch;
  return result;
}

}  // namespace

TrainResult train_supervised(Model& model, std::span<const PatientData> patients, const TrainConfig& cfg, double lr,
                             std::size_t patience, const std::string& phase) {
  if (patients.empty()) throw ArgumentError(phase + ": no patients");
  return run_phase(model, pool(patients), cfg, lr, patience, 0.0, phase);
}

TrainResult train_source(Model& model, std::span<const PatientData> sources, const TrainConfig& cfg) {
  if (sources.size() < 2) throw ArgumentError("train_source: at least two source patients are required");
  const bool head = model.n_classes() > 0;
  if (head && cfg.lambda > 0.0 && model.n_classes() < sources.size()) {
    throw ArgumentError("train_source: adversarial head has " + std::to_string(model.n_classes()) + " classes for " +
                        std::to_string(sources.size()) + " source patients");
  }
  if (!head && cfg.lambda > 0.0) {
    spdlog::info("train_source: {} has no adversarial head; training without the adversarial term", model.format());
  }
  return run_phase(model, pool(sources), cfg, cfg.lr_source, cfg.patience_source, cfg.lambda, "source");
}

TrainResult finetune(Model& model, const PatientData& target, const TrainConfig& cfg) {
  return run_phase(model, pool(std::span<const PatientData>(&target, 1)), cfg, cfg.lr_finetune,
                   cfg.patience_finetune, 0.0, "finetune");
}

void write_history_csv(std::ostream& out, std::span<const EpochRecord> history) {
  out << "epoch,train_loss,valid_mse,valid_ce,lr,phase\n";
  char buf[160];
  for (const auto& r : history) {
    std::string ce;
    if (std::isfinite(r.valid_ce)) {
      std::snprintf(buf, sizeof buf, "%.10g", r.valid_ce);
      ce = buf;
    }
    std::snprintf(buf, sizeof buf, "%zu,%.10g,%.10g,%s,%.10g,", r.epoch, r.train_loss, r.valid_mse, ce.c_str(), r.lr);
    out << buf << r.phase << '\n';
  }
}

}  // namespace retain::train
