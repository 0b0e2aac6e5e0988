// SPDX-License-Identifier: Apache-2.0
#pragma once

// Seeded synthetic patients: glucose relaxes towards a basal level, rises with
// absorbed carbohydrates and falls with active insulin, sampled every 5 minutes.

#include <cstdint>
#include <nlohmann/json.hpp>
#include <vector>

#include "retain/data/series.hpp"

namespace retain::synth {

struct Meal {
  double minute_of_day = 0.0;
  double grams = 0.0;
};

struct PatientProfile {
  std::string id = "patient";
  double basal = 120.0;               // mg/dL, in [80, 160]
  double cho_sensitivity = 3.0;       // mg/dL per g absorbed
  double insulin_sensitivity = 30.0;  // mg/dL per unit acting
  double return_minutes = 90.0;       // time constant of the return to basal
  double cho_peak_minutes = 45.0;     // absorption kernel peak
  double insulin_peak_minutes = 75.0; // action kernel peak
  std::vector<Meal> meals;            // daily schedule
  double meal_jitter_minutes = 20.0;  // uniform +- jitter on meal times
  double meal_size_jitter = 0.2;      // grams scaled by U(1 - j, 1 + j)
  double bolus_per_gram = 0.08;       // insulin units delivered with each meal
  double noise_std = 1.5;             // mg/dL
  double missing_rate = 0.0;          // probability a reading is dropped
  std::uint64_t seed = 0;

  /// Throws ConfigurationError on non-positive sensitivities or a basal outside [80, 160].
  void validate() const;
};

/// Default three meals a day.
std::vector<Meal> default_meals();

/// Profile number `index` of a cohort: basal, sensitivities and meal sizes vary per patient.
PatientProfile make_profile(std::size_t index, std::uint64_t cohort_seed);

/// `days` x 288 readings starting at `start`, beginning at basal. Glucose is clipped to
/// [20.5, 499.5] with a warning.
data::GlucoseSeries generate_patient(const PatientProfile& profile, int days, data::Minutes start);

/// Starting date of generated series: 2021-01-04T00:00.
data::Minutes default_start();

nlohmann::json to_json(const PatientProfile& p);

}  // namespace retain::synth
