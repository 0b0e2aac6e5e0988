// SPDX-License-Identifier: Apache-2.0
#pragma once

// Command-line front end: synth, preprocess, train, evaluate and explain.

#include <filesystem>
#include <memory>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "retain/cli/run_config.hpp"
#include "retain/data/pipeline.hpp"
#include "retain/eval/cgega.hpp"
#include "retain/model.hpp"

namespace retain::cli {

enum ExitCode : int { kOk = 0, kUsage = 2, kMissingInput = 3, kNumericFailure = 4, kCapability = 5 };

/// Runs one command line (without the program name) and returns its exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Maps a library exception onto the exit code reported for it.
int exit_code_for(const std::exception& e);

/// Builds an untrained model of kind "retain", "stdattn" or "lstm".
std::unique_ptr<Model> make_model(const std::string& kind, const RunConfig& cfg, std::size_t seq_len,
                                  std::size_t input_dim, std::size_t n_classes);

/// Anything that maps standardized windows to standardized predictions.
class Predictor {
 public:
  virtual ~Predictor() = default;
  virtual std::string format() const = 0;
  virtual std::vector<double> predict(std::span<const data::Sample> samples) const = 0;
  /// The underlying trainable model, or nullptr for stubs.
  virtual const Model* model() const { return nullptr; }
};

/// Wraps a model as a predictor.
std::unique_ptr<Predictor> model_predictor(std::unique_ptr<Model> model);

/// Reads a model file. Besides the trained formats, {"format": "stub-v1", "kind": "oracle" | "mean"}
/// gives the perfect predictor and the training-mean predictor.
/// Throws MissingInputError for a missing file and IngestionError for an unknown format.
std::unique_ptr<Predictor> load_predictor(const std::filesystem::path& path);

struct Evaluation {
  eval::PredictionSeries series;
  double rmse = 0.0;
  double mape = 0.0;
  eval::CgEgaReport cgega;
};

/// Predicts, rescales to mg/dL and scores `samples`.
Evaluation evaluate_samples(const Predictor& predictor, std::span<const data::Sample> samples,
                            const data::Scaling& scaling);

}  // namespace retain::cli
