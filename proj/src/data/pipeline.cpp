// SPDX-License-Identifier: Apache-2.0
#include "retain/data/pipeline.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>

#include "retain/errors.hpp"

namespace retain::data {

void PipelineConfig::validate() const {
  if (seq_len < 2) throw ConfigurationError("seq_len must be at least 2");
  if (ph_steps < 1) throw ConfigurationError("ph_steps must be at least 1");
  if (period < 1) throw ConfigurationError("period must be a positive number of minutes");
  if (!(spike_threshold > 0.0)) throw ConfigurationError("spike_threshold must be positive");
}

GlucoseSeries clean_spikes(const GlucoseSeries& series, double threshold) {
  GlucoseSeries out = series;
  const auto& g = series.glucose;
  for (std::size_t k = 1; k + 1 < g.size(); ++k) {
    if (is_missing(g[k - 1]) || is_missing(g[k]) || is_missing(g[k + 1])) continue;
    const double rise = g[k] - g[k - 1];
    const double fall = g[k + 1] - g[k];
    if (std::abs(rise) > threshold && std::abs(fall) > threshold && rise * fall < 0.0) out.glucose[k] = kMissing;
  }
  return out;
}

GlucoseSeries resample(const GlucoseSeries& series, Minutes period) {
  if (period < 1) throw ConfigurationError("resample: period must be positive");
  GlucoseSeries out;
  out.patient_id = series.patient_id;
  if (series.size() == 0) return out;
  for (std::size_t k = 1; k < series.size(); ++k) {
    if (series.time[k] <= series.time[k - 1]) {
      throw IngestionError("series " + series.patient_id + ": duplicate or out-of-order timestamp " +
                           format_timestamp(series.time[k]));
    }
  }
  const Minutes t0 = series.time.front();
  auto slot_of = [&](Minutes t) {
    const Minutes d = t - t0;
    Minutes idx = d / period;
    if (2 * (d % period) > period) ++idx;
    return static_cast<std::size_t>(idx);
  };
  const std::size_t slots = slot_of(series.time.back()) + 1;
  out.time.resize(slots);
  for (std::size_t s = 0; s < slots; ++s) out.time[s] = t0 + static_cast<Minutes>(s) * period;
  out.glucose.assign(slots, kMissing);
  out.cho.assign(slots, 0.0);
  out.insulin.assign(slots, 0.0);
  std::vector<Minutes> best_distance(slots, 0);
  for (std::size_t k = 0; k < series.size(); ++k) {
    const std::size_t s = slot_of(series.time[k]);
    out.cho[s] += series.cho[k];
    out.insulin[s] += series.insulin[k];
    if (is_missing(series.glucose[k])) continue;
    const Minutes distance = std::abs(series.time[k] - out.time[s]);
    if (is_missing(out.glucose[s]) || distance < best_distance[s]) {
      out.glucose[s] = series.glucose[k];
      best_distance[s] = distance;
    }
  }
  return out;
}

std::vector<Sample> build_samples(const GlucoseSeries& grid, std::size_t seq_len, std::size_t ph_steps) {
  std::vector<Sample> out;
  const std::size_t n = grid.size();
  if (seq_len == 0 || n < seq_len + ph_steps) return out;
  out.reserve(n - seq_len - ph_steps + 1);
  for (std::size_t t = seq_len - 1; t + ph_steps < n; ++t) {
    Sample s;
    s.x = Matrix(seq_len, kVariables);
    for (std::size_t i = 0; i < seq_len; ++i) {
      const std::size_t row = t + 1 - seq_len + i;
      s.x(i, kGlucose) = grid.glucose[row];
      s.x(i, kCho) = grid.cho[row];
      s.x(i, kInsulin) = grid.insulin[row];
    }
    s.y = grid.glucose[t + ph_steps];
    s.anchor_time = grid.time[t];
    s.target_time = grid.time[t + ph_steps];
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<Sample> recover_missing(std::span<const Sample> samples) {
  std::vector<Sample> out;
  out.reserve(samples.size());
  for (const Sample& s : samples) {
    if (is_missing(s.y)) continue;
    std::vector<std::size_t> known;
    for (std::size_t i = 0; i < s.x.rows(); ++i) {
      if (!is_missing(s.x(i, kGlucose))) known.push_back(i);
    }
    if (known.size() < 2) continue;
    Sample r = s;
    auto line = [&](std::size_t a, std::size_t b, std::size_t i) {
      const double ga = s.x(a, kGlucose);
      const double gb = s.x(b, kGlucose);
      const double slope = (gb - ga) / (static_cast<double>(b) - static_cast<double>(a));
      return ga + slope * (static_cast<double>(i) - static_cast<double>(a));
    };
    std::size_t next = 0;  // index into `known` of the first known row at or after i
    for (std::size_t i = 0; i < s.x.rows(); ++i) {
      while (next < known.size() && known[next] < i) ++next;
      if (next < known.size() && known[next] == i) continue;
      if (next == 0) {
        r.x(i, kGlucose) = line(known[0], known[1], i);
      } else if (next == known.size()) {
        r.x(i, kGlucose) = line(known[known.size() - 2], known.back(), i);
      } else {
        r.x(i, kGlucose) = line(known[next - 1], known[next], i);
      }
    }
    out.push_back(std::move(r));
  }
  return out;
}

void SplitSpec::validate() const {
  if (!(test_days > 0.0)) throw ConfigurationError("test_days must be positive");
  if (!(valid_fraction > 0.0 && valid_fraction < 1.0)) throw ConfigurationError("valid_fraction must be in (0, 1)");
}

namespace {

// Index of the first test sample; samples must be ordered by target_time.
std::size_t test_start(std::span<const Sample> samples, const SplitSpec& spec) {
  spec.validate();
  for (std::size_t k = 1; k < samples.size(); ++k) {
    if (samples[k].target_time < samples[k - 1].target_time) {
      throw ArgumentError("split: samples are not ordered by target time");
    }
  }
  if (samples.empty()) return 0;
  const Minutes cutoff = samples.back().target_time - std::llround(spec.test_days * 1440.0);
  std::size_t k = samples.size();
  while (k > 0 && samples[k - 1].target_time > cutoff) --k;
  return k;
}

void require_sizes(const SplitSamples& s, const std::string& what) {
  if (s.train.size() < 3 || s.valid.size() < 3 || s.test.size() < 3) {
    throw ConfigurationError(what + " leaves too few samples (train " + std::to_string(s.train.size()) + ", valid " +
                             std::to_string(s.valid.size()) + ", test " + std::to_string(s.test.size()) +
                             "; at least 3 each are required)");
  }
}

}  // namespace

SplitSamples split(std::span<const Sample> samples, const SplitSpec& spec) {
  const std::size_t cut = test_start(samples, spec);
  const std::size_t n_valid = static_cast<std::size_t>(std::llround(spec.valid_fraction * static_cast<double>(cut)));
  const std::size_t n_train = cut - n_valid;
  SplitSamples out;
  out.train.assign(samples.begin(), samples.begin() + static_cast<std::ptrdiff_t>(n_train));
  out.valid.assign(samples.begin() + static_cast<std::ptrdiff_t>(n_train), samples.begin() + static_cast<std::ptrdiff_t>(cut));
  out.test.assign(samples.begin() + static_cast<std::ptrdiff_t>(cut), samples.end());
  require_sizes(out, "split");
  return out;
}

std::vector<SplitSamples> kfold_splits(std::span<const Sample> samples, const SplitSpec& spec, std::size_t folds) {
  if (folds < 2) throw ConfigurationError("kfold_splits: at least 2 folds are required");
  const std::size_t cut = test_start(samples, spec);
  std::vector<SplitSamples> out(folds);
  for (std::size_t f = 0; f < folds; ++f) {
    const std::size_t lo = f * cut / folds;
    const std::size_t hi = (f + 1) * cut / folds;
    for (std::size_t k = 0; k < cut; ++k) (k >= lo && k < hi ? out[f].valid : out[f].train).push_back(samples[k]);
    out[f].test.assign(samples.begin() + static_cast<std::ptrdiff_t>(cut), samples.end());
    require_sizes(out[f], "fold " + std::to_string(f));
  }
  return out;
}

namespace {

double safe_std(double variance, const std::string& what) {
  const double sd = std::sqrt(variance);
  if (sd < 1e-8) {
    spdlog::warn("standard deviation of {} is below 1e-8; using 1", what);
    return 1.0;
  }
  return sd;
}

const char* kVariableNames[kVariables] = {"glucose", "CHO", "insulin"};

}  // namespace

Scaling fit_scaling(std::span<const Sample> train) {
  if (train.empty()) throw ArgumentError("fit_scaling: empty training set");
  const std::size_t cols = train.front().x.cols();
  Scaling s;
  s.mean.assign(cols, 0.0);
  s.std.assign(cols, 0.0);
  double rows = 0.0;
  for (const Sample& x : train) {
    if (x.x.cols() != cols) throw DimensionError("fit_scaling: windows have different widths");
    for (std::size_t i = 0; i < x.x.rows(); ++i)
      for (std::size_t j = 0; j < cols; ++j) s.mean[j] += x.x(i, j);
    rows += static_cast<double>(x.x.rows());
  }
  for (double& m : s.mean) m /= rows;
  std::vector<double> var(cols, 0.0);
  for (const Sample& x : train)
    for (std::size_t i = 0; i < x.x.rows(); ++i)
      for (std::size_t j = 0; j < cols; ++j) var[j] += (x.x(i, j) - s.mean[j]) * (x.x(i, j) - s.mean[j]);
  for (std::size_t j = 0; j < cols; ++j) {
    s.std[j] = safe_std(var[j] / rows, j < kVariables ? kVariableNames[j] : "column " + std::to_string(j));
  }

  double ty = 0.0;
  for (const Sample& x : train) ty += x.y;
  s.target_mean = ty / static_cast<double>(train.size());
  double tv = 0.0;
  for (const Sample& x : train) tv += (x.y - s.target_mean) * (x.y - s.target_mean);
  s.target_std = safe_std(tv / static_cast<double>(train.size()), "target");
  return s;
}

std::vector<Sample> apply_scaling(std::span<const Sample> samples, const Scaling& scaling) {
  std::vector<Sample> out(samples.begin(), samples.end());
  for (Sample& s : out) {
    if (s.x.cols() != scaling.mean.size()) throw DimensionError("apply_scaling: window width differs from scaling");
    for (std::size_t i = 0; i < s.x.rows(); ++i)
      for (std::size_t j = 0; j < s.x.cols(); ++j) s.x(i, j) = (s.x(i, j) - scaling.mean[j]) / scaling.std[j];
    s.y = standardize_target(s.y, scaling);
  }
  return out;
}

double standardize_target(double y, const Scaling& scaling) { return (y - scaling.target_mean) / scaling.target_std; }

double destandardize_target(double z, const Scaling& scaling) { return z * scaling.target_std + scaling.target_mean; }

Matrix destandardize_window(const Matrix& x, const Scaling& scaling) {
  if (x.cols() != scaling.mean.size()) throw DimensionError("destandardize_window: window width differs from scaling");
  Matrix out = x;
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j) out(i, j) = x(i, j) * scaling.std[j] + scaling.mean[j];
  return out;
}

StandardizedSplits standardize(const SplitSamples& splits) {
  StandardizedSplits out;
  out.scaling = fit_scaling(splits.train);
  out.splits.train = apply_scaling(splits.train, out.scaling);
  out.splits.valid = apply_scaling(splits.valid, out.scaling);
  out.splits.test = apply_scaling(splits.test, out.scaling);
  return out;
}

std::vector<Sample> prepare_samples(const GlucoseSeries& raw, const PipelineConfig& cfg) {
  cfg.validate();
  const GlucoseSeries grid = resample(clean_spikes(raw, cfg.spike_threshold), cfg.period);
  return recover_missing(build_samples(grid, cfg.seq_len, cfg.ph_steps));
}

nlohmann::json to_json(const Scaling& s) {
  return {{"mean", s.mean}, {"std", s.std}, {"target_mean", s.target_mean}, {"target_std", s.target_std}};
}

Scaling scaling_from_json(const nlohmann::json& j) {
  Scaling s;
  s.mean = j.at("mean").get<std::vector<double>>();
  s.std = j.at("std").get<std::vector<double>>();
  s.target_mean = j.at("target_mean").get<double>();
  s.target_std = j.at("target_std").get<double>();
  if (s.mean.size() != s.std.size()) throw ArgumentError("scaling: mean and std lengths differ");
  for (double sd : s.std) {
    if (!(sd > 0.0)) throw ArgumentError("scaling: standard deviations must be positive");
  }
  if (!(s.target_std > 0.0)) throw ArgumentError("scaling: target_std must be positive");
  return s;
}

}  // namespace retain::data
