// SPDX-License-Identifier: Apache-2.0
#pragma once

// Post-processing of standardized predictions back to mg/dL and the point metrics
// computed on the reconstructed series.

#include <span>
#include <vector>

#include "retain/data/pipeline.hpp"

namespace retain::eval {

using data::Minutes;

struct TimedValue {
  Minutes time = 0;
  double value = 0.0;
};

struct PredictionSeries {
  std::vector<Minutes> time;  // strictly increasing
  std::vector<double> y_true;  // mg/dL
  std::vector<double> y_pred;  // mg/dL

  std::size_t size() const { return time.size(); }
};

/// Rescales standardized predictions and targets with the target scaling and orders
/// them by timestamp. A repeated timestamp keeps its last value (with a warning).
/// Throws ArgumentError when a prediction's timestamp has no target.
PredictionSeries reconstruct(std::span<const TimedValue> predictions, std::span<const TimedValue> targets,
                             const data::Scaling& scaling);

/// Root mean squared error. Throws ArgumentError on an empty series.
double rmse(const PredictionSeries& s);
/// Mean absolute percentage error, in percent. Throws ArgumentError on an empty
/// series or a non-positive reference value.
double mape(const PredictionSeries& s);

/// (v_k - v_{k-1}) / (t_k - t_{k-1}) in mg/dL/min for k = 1..n-1. Throws ArgumentError
/// for fewer than 2 points, mismatched lengths or non-increasing timestamps.
std::vector<double> rates(std::span<const Minutes> time, std::span<const double> values);

}  // namespace retain::eval
