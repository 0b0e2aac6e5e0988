// SPDX-License-Identifier: Apache-2.0
#pragma once

// Preprocessing chain: spike cleaning, 5-minute resampling, sliding-window
// samples, missing-glucose recovery, chronological splitting, standardization.

#include <cstddef>
#include <nlohmann/json.hpp>
#include <span>
#include <string>
#include <vector>

#include "retain/data/series.hpp"
#include "retain/num/matrix.hpp"

namespace retain::data {

using num::Matrix;

inline constexpr std::size_t kGlucose = 0;
inline constexpr std::size_t kCho = 1;
inline constexpr std::size_t kInsulin = 2;
inline constexpr std::size_t kVariables = 3;

struct PipelineConfig {
  std::size_t seq_len = 37;        // L, window rows
  std::size_t ph_steps = 6;        // prediction horizon in grid steps
  Minutes period = 5;              // grid spacing in minutes
  double spike_threshold = 50.0;   // mg/dL per step

  void validate() const;
};

struct Sample {
  Matrix x;                  // L x 3, oldest row first: glucose, CHO, insulin
  double y = 0.0;            // glucose at target_time, NaN when not measured
  Minutes anchor_time = 0;   // timestamp of the last window row
  Minutes target_time = 0;   // anchor_time + ph_steps * period
};

/// Marks isolated glucose spikes as missing: a point whose jumps to both known
/// neighbours exceed `threshold` with opposite signs. Endpoints, and points next
/// to a missing reading, are never removed.
GlucoseSeries clean_spikes(const GlucoseSeries& series, double threshold = 50.0);

/// Maps the series onto a regular grid starting at its first timestamp. Each glucose
/// reading goes to the nearest slot (ties to the earlier one; the closest reading wins
/// a contested slot); CHO and insulin are summed into their slot.
/// Throws IngestionError on duplicate or decreasing timestamps.
GlucoseSeries resample(const GlucoseSeries& series, Minutes period = 5);

/// One sample per grid index with a full window and a target index inside the series:
/// size() - seq_len - ph_steps + 1 samples, or none for shorter series.
std::vector<Sample> build_samples(const GlucoseSeries& grid, std::size_t seq_len = 37, std::size_t ph_steps = 6);

/// Fills missing glucose inside each window: interior gaps by linear interpolation
/// between the nearest known readings, edge gaps by linear extrapolation from the two
/// nearest known readings. Drops samples with a missing target or fewer than two
/// known glucose readings in the window.
std::vector<Sample> recover_missing(std::span<const Sample> samples);

struct SplitSpec {
  double test_days = 10.0;
  double valid_fraction = 0.2;

  void validate() const;
};

struct SplitSamples {
  std::vector<Sample> train;
  std::vector<Sample> valid;
  std::vector<Sample> test;
};

/// Test: samples whose target_time lies within the last `test_days` before the latest
/// target_time. The rest, in time order, splits into train and the most recent
/// `valid_fraction` as validation. Throws ConfigurationError if any split has < 3 samples.
SplitSamples split(std::span<const Sample> samples, const SplitSpec& spec);

/// Same test set as split(); the non-test period is cut into `folds` contiguous blocks
/// and fold f validates on block f. Throws ConfigurationError as split().
std::vector<SplitSamples> kfold_splits(std::span<const Sample> samples, const SplitSpec& spec, std::size_t folds = 5);

struct Scaling {
  std::vector<double> mean;  // per input variable
  std::vector<double> std;
  double target_mean = 0.0;
  double target_std = 1.0;

  bool operator==(const Scaling&) const = default;
};

/// Per-variable mean/std over every row of the training windows and over the
/// training targets (population std). A std below 1e-8 is replaced by 1.
Scaling fit_scaling(std::span<const Sample> train);
std::vector<Sample> apply_scaling(std::span<const Sample> samples, const Scaling& scaling);
double standardize_target(double y, const Scaling& scaling);
double destandardize_target(double z, const Scaling& scaling);
Matrix destandardize_window(const Matrix& x, const Scaling& scaling);

struct StandardizedSplits {
  SplitSamples splits;
  Scaling scaling;
};

/// Fits on train and applies to all three splits. Throws ArgumentError on an empty train split.
StandardizedSplits standardize(const SplitSamples& splits);

/// clean_spikes, resample, build_samples and recover_missing in order.
std::vector<Sample> prepare_samples(const GlucoseSeries& raw, const PipelineConfig& cfg);

nlohmann::json to_json(const Scaling& s);
Scaling scaling_from_json(const nlohmann::json& j);

}  // namespace retain::data
