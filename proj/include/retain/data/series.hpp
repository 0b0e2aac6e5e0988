// SPDX-License-Identifier: Apache-2.0
#pragma once

// Raw per-patient glucose / carbohydrate / insulin time series and its CSV form.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <limits>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace retain::data {

/// Minutes since 1970-01-01T00:00 (UTC, no leap seconds).
using Minutes = std::int64_t;

inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();
inline bool is_missing(double v) { return std::isnan(v); }

/// Parses "YYYY-MM-DDTHH:MM[:SS]" (a space may replace the T; seconds are truncated).
/// Throws IngestionError on malformed input.
Minutes parse_timestamp(std::string_view text);
/// Formats as "YYYY-MM-DDTHH:MM:00".
std::string format_timestamp(Minutes t);

struct GlucoseSeries {
  std::string patient_id;
  std::vector<Minutes> time;
  std::vector<double> glucose;  // mg/dL, NaN when missing
  std::vector<double> cho;      // grams, 0 when absent
  std::vector<double> insulin;  // units, 0 when absent

  std::size_t size() const { return time.size(); }
  void push_back(Minutes t, double g, double c, double i);
  /// Throws IngestionError unless columns agree in length, timestamps strictly
  /// increase, glucose is missing or in (0, 600) and events are finite and >= 0.
  void validate() const;
  bool operator==(const GlucoseSeries& other) const;
};

/// Reads the `datetime,glucose,CHO,insulin` layout. Empty glucose is missing,
/// empty CHO/insulin is 0. Rows must be in time order without duplicates.
GlucoseSeries read_series_csv(std::istream& in, const std::string& patient_id);
/// Patient id defaults to the file stem. Throws IngestionError if the file cannot be opened.
GlucoseSeries load_series(const std::filesystem::path& path);
void write_series_csv(std::ostream& out, const GlucoseSeries& series);

/// Shortest round-trip decimal form of `v`.
std::string format_double(double v);
/// Strict decimal parse of the whole field. Throws IngestionError naming `what`.
double parse_double(std::string_view field, const std::string& what);

}  // namespace retain::data
