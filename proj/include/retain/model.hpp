// SPDX-License-Identifier: Apache-2.0
#pragma once

// Common interface of the trainable forecasters (RETAIN and the baselines).

#include <cstddef>
#include <memory>
#include <nlohmann/json.hpp>
#include <span>
#include <string>
#include <vector>

#include "retain/num/matrix.hpp"
#include "retain/num/params.hpp"
#include "retain/num/tape.hpp"

namespace retain {

/// B windows of L x r stacked time-major: row t*B + b is timestep t of window b.
struct WindowBatch {
  num::Matrix data;
  std::size_t batch = 0;
  std::size_t steps = 0;
};

WindowBatch make_batch(std::span<const num::Matrix* const> windows);
WindowBatch make_batch(std::span<const num::Matrix> windows);

/// Per-timestep B x r slices of a batch, recorded as constants.
std::vector<num::Var> timestep_inputs(num::Tape& tape, const WindowBatch& batch);

struct GraphOptions {
  /// Record parameters as differentiable leaves rather than constants.
  bool trainable = false;
  /// Gradient factor applied where the adversarial head reads the shared representation.
  double reversal = -1.0;
};

struct GraphOutputs {
  std::vector<num::Var> params;  // parameter Vars in parameters() order
  num::Var y_hat;                // B x 1
  num::Var adv_probs;            // B x K; invalid when the model has no adversarial head
  num::Var penalty;              // 1 x 1 weighted regularizer; invalid when the model has none
};

class Model {
 public:
  virtual ~Model() = default;

  /// Serialization format tag, e.g. "retain-v1".
  virtual std::string format() const = 0;
  virtual std::size_t seq_len() const = 0;
  virtual std::size_t input_dim() const = 0;
  /// Number of adversarial classes; 0 when the model has no adversarial head.
  virtual std::size_t n_classes() const = 0;

  virtual std::vector<num::NamedRef<num::Matrix>> parameters() = 0;
  virtual std::vector<num::NamedRef<const num::Matrix>> parameters() const = 0;

  virtual GraphOutputs graph(num::Tape& tape, const WindowBatch& batch, const GraphOptions& options) const = 0;

  virtual std::unique_ptr<Model> clone() const = 0;
  /// Config block only; parameters are written by save_model.
  virtual nlohmann::json config_json() const = 0;
};

/// Inference in batches; returns one prediction per window.
std::vector<double> predict(const Model& model, std::span<const num::Matrix* const> windows,
                            std::size_t batch_size = 256);
std::vector<double> predict(const Model& model, std::span<const num::Matrix> windows, std::size_t batch_size = 256);

std::vector<double> flatten_parameters(const Model& model);
void assign_parameters(Model& model, std::span<const double> flat);

// Parameter arrays as {"rows", "cols", "data"} with data written as %.17g strings.
nlohmann::json matrix_to_json(const num::Matrix& m);
/// Accepts data entries as strings or numbers; rejects non-finite values.
num::Matrix matrix_from_json(const nlohmann::json& j, const std::string& name);

nlohmann::json model_to_json(const Model& model);
/// Fills every parameter of `model` from `doc["params"]`, checking names and shapes.
void load_parameters(Model& model, const nlohmann::json& doc);

}  // namespace retain
