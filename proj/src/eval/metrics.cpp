// SPDX-License-Identifier: Apache-2.0
#include "retain/eval/metrics.hpp"

#include <spdlog/spdlog.h>

#include <cmath>
#include <map>

#include "retain/errors.hpp"

namespace retain::eval {

PredictionSeries reconstruct(std::span<const TimedValue> predictions, std::span<const TimedValue> targets,
                             const data::Scaling& scaling) {
  std::map<Minutes, double> truth;
  for (const TimedValue& t : targets) truth[t.time] = t.value;
  std::map<Minutes, double> pred;
  std::size_t duplicates = 0;
  for (const TimedValue& p : predictions) {
    if (!truth.contains(p.time)) {
      throw ArgumentError("reconstruct: prediction at " + data::format_timestamp(p.time) + " has no target");
    }
    if (!pred.insert_or_assign(p.time, p.value).second) ++duplicates;
  }
  if (duplicates > 0) spdlog::warn("reconstruct: {} repeated timestamps, keeping the last prediction", duplicates);
  PredictionSeries s;
  for (const auto& [t, v] : pred) {
    s.time.push_back(t);
    s.y_true.push_back(data::destandardize_target(truth.at(t), scaling));
    s.y_pred.push_back(data::destandardize_target(v, scaling));
  }
  return s;
}

double rmse(const PredictionSeries& s) {
  if (s.size() == 0) throw ArgumentError("rmse: empty series");
  double sum = 0.0;
  for (std::size_t k = 0; k < s.size(); ++k) sum += (s.y_pred[k] - s.y_true[k]) * (s.y_pred[k] - s.y_true[k]);
  return std::sqrt(sum / static_cast<double>(s.size()));
}

double mape(const PredictionSeries& s) {
  if (s.size() == 0) throw ArgumentError("mape: empty series");
  double sum = 0.0;
  for (std::size_t k = 0; k < s.size(); ++k) {
    if (!(s.y_true[k] > 0.0)) throw ArgumentError("mape: reference values must be positive");
    sum += std::abs(s.y_pred[k] - s.y_true[k]) / s.y_true[k];
  }
  return 100.0 * sum / static_cast<double>(s.size());
}

std::vector<double> rates(std::span<const Minutes> time, std::span<const double> values) {
  if (time.size() != values.size()) throw ArgumentError("rates: time and value lengths differ");
  if (time.size() < 2) throw ArgumentError("rates: at least 2 points are required");
  std::vector<double> out(time.size() - 1);
  for (std::size_t k = 1; k < time.size(); ++k) {
    const Minutes dt = time[k] - time[k - 1];
    if (dt <= 0) throw ArgumentError("rates: timestamps must increase");
    out[k - 1] = (values[k] - values[k - 1]) / static_cast<double>(dt);
  }
  return out;
}

}  // namespace retain::eval
