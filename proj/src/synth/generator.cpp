// SPDX-License-Identifier: Apache-2.0
#include "retain/synth/generator.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "retain/errors.hpp"

namespace retain::synth {

namespace {

constexpr data::Minutes kPeriod = 5;
constexpr double kLow = 20.5;
constexpr double kHigh = 499.5;

struct Dose {
  double minute;  // since the start of the series
  double amount;
};

// Gamma(2) kernel with unit mass, peaking at `peak` minutes.
double kernel(double tau, double peak) { return tau <= 0.0 ? 0.0 : tau / (peak * peak) * std::exp(-tau / peak); }

double activity(const std::vector<Dose>& doses, double minute, double peak) {
  double a = 0.0;
  for (const Dose& d : doses) {
    const double tau = minute - d.minute;
    if (tau > 0.0 && tau < 12.0 * peak) a += d.amount * kernel(tau, peak);
  }
  return a;
}

}  // namespace

void PatientProfile::validate() const {
  if (!(basal >= 80.0 && basal <= 160.0)) throw ConfigurationError("profile " + id + ": basal must be in [80, 160]");
  if (!(cho_sensitivity > 0.0) || !(insulin_sensitivity > 0.0)) {
    throw ConfigurationError("profile " + id + ": sensitivities must be positive");
  }
  if (!(return_minutes > 0.0) || !(cho_peak_minutes > 0.0) || !(insulin_peak_minutes > 0.0)) {
    throw ConfigurationError("profile " + id + ": time constants must be positive");
  }
  if (!(noise_std >= 0.0) || !(bolus_per_gram >= 0.0) || !(meal_jitter_minutes >= 0.0) ||
      !(meal_size_jitter >= 0.0 && meal_size_jitter < 1.0)) {
    throw ConfigurationError("profile " + id + ": noise, bolus and jitter settings must be non-negative");
  }
  if (!(missing_rate >= 0.0 && missing_rate < 1.0)) {
    throw ConfigurationError("profile " + id + ": missing_rate must be in [0, 1)");
  }
  for (const Meal& m : meals) {
    if (!(m.grams >= 0.0) || !(m.minute_of_day >= 0.0 && m.minute_of_day < 1440.0)) {
      throw ConfigurationError("profile " + id + ": meals need non-negative grams and a time within the day");
    }
  }
}

std::vector<Meal> default_meals() { return {{7.5 * 60.0, 50.0}, {12.5 * 60.0, 70.0}, {19.0 * 60.0, 80.0}}; }

PatientProfile make_profile(std::size_t index, std::uint64_t cohort_seed) {
  std::seed_seq seq{static_cast<std::uint32_t>(cohort_seed), static_cast<std::uint32_t>(cohort_seed >> 32),
                    static_cast<std::uint32_t>(index)};
  std::mt19937_64 rng(seq);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto between = [&](double lo, double hi) { return lo + (hi - lo) * u(rng); };
  PatientProfile p;
  char id[32];
  std::snprintf(id, sizeof id, "patient_%02zu", index + 1);
  p.id = id;
  p.basal = between(90.0, 150.0);
  p.cho_sensitivity = between(2.5, 4.0);
  p.insulin_sensitivity = between(20.0, 40.0);
  p.return_minutes = between(60.0, 120.0);
  p.cho_peak_minutes = between(35.0, 55.0);
  p.insulin_peak_minutes = between(60.0, 90.0);
  p.bolus_per_gram = between(0.06, 0.1);
  p.noise_std = between(1.0, 2.0);
  p.meals = default_meals();
  for (Meal& m : p.meals) m.grams *= between(0.8, 1.2);
  p.seed = rng();
  return p;
}

data::Minutes default_start() { return data::parse_timestamp("2021-01-04T00:00"); }

data::GlucoseSeries generate_patient(const PatientProfile& profile, int days, data::Minutes start) {
  profile.validate();
  if (days < 1) throw ConfigurationError("generate_patient: days must be at least 1");
  std::mt19937_64 rng(profile.seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 1.0);

  const std::size_t steps = static_cast<std::size_t>(days) * 1440 / kPeriod;
  std::vector<double> cho(steps, 0.0), insulin(steps, 0.0);
  std::vector<Dose> meals, boluses;
  for (int d = 0; d < days; ++d) {
    for (const Meal& m : profile.meals) {
      const double jitter = profile.meal_jitter_minutes * (2.0 * u(rng) - 1.0);
      const double grams = m.grams * (1.0 + profile.meal_size_jitter * (2.0 * u(rng) - 1.0));
      const double minute = d * 1440.0 + m.minute_of_day + jitter;
      const auto slot = static_cast<std::size_t>(std::max(0.0, std::round(minute / kPeriod)));
      if (slot >= steps || grams <= 0.0) continue;
      const double at = static_cast<double>(slot * kPeriod);
      cho[slot] += grams;
      meals.push_back({at, grams});
      const double bolus = grams * profile.bolus_per_gram;
      if (bolus > 0.0) {
        insulin[slot] += bolus;
        boluses.push_back({at, bolus});
      }
    }
  }

  data::GlucoseSeries s;
  s.patient_id = profile.id;
  double g = profile.basal;
  bool clipped = false;
  for (std::size_t k = 0; k < steps; ++k) {
    const double minute = static_cast<double>(k * kPeriod);
    if (k > 0) {
      // One-minute Euler sub-steps across the preceding grid interval.
      for (int sub = 0; sub < kPeriod; ++sub) {
        const double t = minute - kPeriod + sub;
        const double rate = -(g - profile.basal) / profile.return_minutes +
                            profile.cho_sensitivity * activity(meals, t, profile.cho_peak_minutes) -
                            profile.insulin_sensitivity * activity(boluses, t, profile.insulin_peak_minutes);
        g += rate;
      }
    }
    double reading = g + profile.noise_std * noise(rng);
    if (reading < kLow || reading > kHigh) {
      clipped = true;
      reading = std::clamp(reading, kLow, kHigh);
    }
    if (profile.missing_rate > 0.0 && u(rng) < profile.missing_rate) reading = data::kMissing;
    s.push_back(start + static_cast<data::Minutes>(k) * kPeriod, reading, cho[k], insulin[k]);
  }
  if (clipped) spdlog::warn("synthetic patient {}: glucose clipped to [{}, {}] mg/dL", profile.id, kLow, kHigh);
  return s;
}

nlohmann::json to_json(const PatientProfile& p) {
  nlohmann::json meals = nlohmann::json::array();
  for (const Meal& m : p.meals) meals.push_back({{"minute_of_day", m.minute_of_day}, {"grams", m.grams}});
  return {{"id", p.id},
          {"basal", p.basal},
          {"cho_sensitivity", p.cho_sensitivity},
          {"insulin_sensitivity", p.insulin_sensitivity},
          {"return_minutes", p.return_minutes},
          {"cho_peak_minutes", p.cho_peak_minutes},
          {"insulin_peak_minutes", p.insulin_peak_minutes},
          {"meals", meals},
          {"meal_jitter_minutes", p.meal_jitter_minutes},
          {"meal_size_jitter", p.meal_size_jitter},
          {"bolus_per_gram", p.bolus_per_gram},
          {"noise_std", p.noise_std},
          {"missing_rate", p.missing_rate},
          {"seed", p.seed}};
}

}  // namespace retain::synth
