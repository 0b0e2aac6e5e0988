// SPDX-License-Identifier: Apache-2.0
#pragma once

// Continuous glucose error grid analysis: point zones (P-EGA), rate zones (R-EGA)
// and their region-specific combination into AP / BE / EP. Zone geometry and the
// combination grids are data (data/cgega/cgega_tables.json, compiled in).

#include <array>
#include <cstddef>
#include <nlohmann/json.hpp>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "retain/eval/metrics.hpp"

namespace retain::eval {

enum class PZone { A, B, C, D, E };
enum class RZone { A, B, uC, lC, uD, lD, uE, lE };
enum class Region { Hypo, Eu, Hyper };
enum class CgClass { AP, BE, EP };

inline constexpr std::size_t kPZones = 5;
inline constexpr std::size_t kRZones = 8;
inline constexpr std::size_t kRegions = 3;

std::string_view to_string(PZone z);
std::string_view to_string(RZone z);
std::string_view to_string(Region r);
std::string_view to_string(CgClass c);
/// Throw ArgumentError on unknown names.
PZone parse_pzone(std::string_view s);
RZone parse_rzone(std::string_view s);
Region parse_region(std::string_view s);

/// hypo below 70 mg/dL, hyper above 180, eu otherwise.
Region region_of(double y_true);

class CgEgaTables {
 public:
  /// Tables compiled into the library.
  static const CgEgaTables& builtin();
  /// Throws ArgumentError on a malformed document.
  static CgEgaTables from_json(const nlohmann::json& doc);

  PZone p_zone(double y_true, double y_pred, double rate_true) const;
  RZone r_zone(double rate_true, double rate_pred) const;
  CgClass classify(PZone p, RZone r, Region region) const;
  const std::string& version() const { return version_; }

  struct Condition {
    double x = 0.0, y = 0.0, delta = 0.0, c = 0.0;
    enum class Op { Le, Lt, Ge, Gt } op = Op::Le;
  };
  using Clause = std::vector<Condition>;  // conjunction
  struct Zone {
    int id = 0;
    std::vector<Clause> clauses;  // disjunction
  };

 private:
  std::string version_;
  std::vector<Zone> p_zones_;
  int p_fallback_ = 0;
  std::vector<std::pair<double, double>> delta_steps_;  // (above, value)
  std::vector<Zone> r_zones_;
  int r_fallback_ = 0;
  std::array<std::array<std::array<CgClass, kRZones>, kPZones>, kRegions> grid_{};
};

PZone p_ega(double y_true, double y_pred, double rate_true);
RZone r_ega(double rate_true, double rate_pred);
CgClass cg_ega_classify(PZone p, RZone r, Region region);
/// Name-based lookup; throws ArgumentError on unknown zones or regions.
CgClass cg_ega_classify(std::string_view p, std::string_view r, std::string_view region);

struct ClassCounts {
  std::size_t ap = 0, be = 0, ep = 0;

  std::size_t total() const { return ap + be + ep; }
  void add(CgClass c);
  /// Fraction of `c`; empty when no point was counted.
  std::optional<double> rate(CgClass c) const;
};

struct PointRecord {
  Minutes time = 0;
  double y_true = 0.0, y_pred = 0.0, rate_true = 0.0, rate_pred = 0.0;
  PZone p_zone = PZone::A;
  RZone r_zone = RZone::A;
  CgClass cls = CgClass::AP;
  Region region = Region::Eu;
};

struct CgEgaReport {
  std::array<ClassCounts, kRegions> regions{};
  ClassCounts overall;
  std::array<std::size_t, kPZones> p_histogram{};
  std::array<std::size_t, kRZones> r_histogram{};
  std::vector<PointRecord> points;  // every point but the first
  std::string tables_version;
};

/// Classifies points 1..n-1 (the first has no rate). Throws ArgumentError for fewer than 2 points.
CgEgaReport cg_ega_report(const PredictionSeries& s, const CgEgaTables& tables = CgEgaTables::builtin());

/// Counts and rates per region and overall plus both zone histograms. Rates of an empty
/// region are omitted.
nlohmann::json to_json(const CgEgaReport& r);
/// Header t,y_true,y_pred,rate_true,rate_pred,p_zone,r_zone,class,region.
void write_points_csv(std::ostream& out, const CgEgaReport& r);

}  // namespace retain::eval
