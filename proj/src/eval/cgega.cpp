// SPDX-License-Identifier: Apache-2.0
#include "retain/eval/cgega.hpp"

#include <cmath>
#include <cstdio>

#include "retain/data/series.hpp"
#include "retain/errors.hpp"

namespace retain::eval {

namespace {

constexpr const char* kBuiltinTables =
#include "cgega_tables.inc"
    ;

constexpr std::array<std::string_view, kPZones> kPNames{"A", "B", "C", "D", "E"};
constexpr std::array<std::string_view, kRZones> kRNames{"A", "B", "uC", "lC", "uD", "lD", "uE", "lE"};
constexpr std::array<std::string_view, kRegions> kRegionNames{"hypo", "eu", "hyper"};
constexpr std::array<std::string_view, 3> kClassNames{"AP", "BE", "EP"};

template <std::size_t N>
int index_of(const std::array<std::string_view, N>& names, std::string_view s, const char* what) {
  for (std::size_t k = 0; k < N; ++k) {
    if (names[k] == s) return static_cast<int>(k);
  }
  throw ArgumentError(std::string("unknown ") + what + " '" + std::string(s) + "'");
}

CgEgaTables::Condition parse_condition(const nlohmann::json& j) {
  CgEgaTables::Condition c;
  c.x = j.value("x", 0.0);
  c.y = j.value("y", 0.0);
  c.delta = j.value("delta", 0.0);
  c.c = j.value("c", 0.0);
  const std::string op = j.at("op").get<std::string>();
  using Op = CgEgaTables::Condition::Op;
  if (op == "<=") c.op = Op::Le;
  else if (op == "<") c.op = Op::Lt;
  else if (op == ">=") c.op = Op::Ge;
  else if (op == ">") c.op = Op::Gt;
  else throw ArgumentError("unknown comparison '" + op + "'");
  return c;
}

template <std::size_t N>
std::vector<CgEgaTables::Zone> parse_zones(const nlohmann::json& grid, const std::array<std::string_view, N>& names,
                                           const char* what) {
  std::vector<CgEgaTables::Zone> zones;
  for (const auto& name : grid.at("order")) {
    CgEgaTables::Zone z;
    z.id = index_of(names, name.get<std::string>(), what);
    for (const auto& clause : grid.at("zones").at(name.get<std::string>())) {
      CgEgaTables::Clause conj;
      for (const auto& cond : clause) conj.push_back(parse_condition(cond));
      z.clauses.push_back(std::move(conj));
    }
    zones.push_back(std::move(z));
  }
  return zones;
}

bool holds(const CgEgaTables::Condition& c, double x, double y, double delta) {
  double s = c.x * x + c.y * y;
  s += c.delta * delta;
  s += c.c;
  using Op = CgEgaTables::Condition::Op;
  switch (c.op) {
    case Op::Le: return s <= 0.0;
    case Op::Lt: return s < 0.0;
    case Op::Ge: return s >= 0.0;
    case Op::Gt: return s > 0.0;
  }
  return false;
}

int first_zone(const std::vector<CgEgaTables::Zone>& zones, int fallback, double x, double y, double delta) {
  for (const auto& z : zones) {
    for (const auto& clause : z.clauses) {
      bool all = true;
      for (const auto& c : clause) all = all && holds(c, x, y, delta);
      if (all) return z.id;
    }
  }
  return fallback;
}

}  // namespace

std::string_view to_string(PZone z) { return kPNames[static_cast<std::size_t>(z)]; }
std::string_view to_string(RZone z) { return kRNames[static_cast<std::size_t>(z)]; }
std::string_view to_string(Region r) { return kRegionNames[static_cast<std::size_t>(r)]; }
std::string_view to_string(CgClass c) { return kClassNames[static_cast<std::size_t>(c)]; }
PZone parse_pzone(std::string_view s) { return static_cast<PZone>(index_of(kPNames, s, "P-EGA zone")); }
RZone parse_rzone(std::string_view s) { return static_cast<RZone>(index_of(kRNames, s, "R-EGA zone")); }
Region parse_region(std::string_view s) { return static_cast<Region>(index_of(kRegionNames, s, "region")); }

Region region_of(double y_true) {
  if (y_true < 70.0) return Region::Hypo;
  if (y_true > 180.0) return Region::Hyper;
  return Region::Eu;
}

const CgEgaTables& CgEgaTables::builtin() {
  static const CgEgaTables tables = from_json(nlohmann::json::parse(kBuiltinTables));
  return tables;
}

CgEgaTables CgEgaTables::from_json(const nlohmann::json& doc) {
  CgEgaTables t;
  try {
    t.version_ = doc.at("version").get<std::string>();
    const auto& p = doc.at("p_ega");
    t.p_zones_ = parse_zones(p, kPNames, "P-EGA zone");
    t.p_fallback_ = index_of(kPNames, p.at("fallback").get<std::string>(), "P-EGA zone");
    for (const auto& step : p.at("delta")) {
      t.delta_steps_.emplace_back(step.at("above").get<double>(), step.at("value").get<double>());
    }
    const auto& r = doc.at("r_ega");
    t.r_zones_ = parse_zones(r, kRNames, "R-EGA zone");
    t.r_fallback_ = index_of(kRNames, r.at("fallback").get<std::string>(), "R-EGA zone");
    const auto& comb = doc.at("combination");
    for (std::size_t g = 0; g < kRegions; ++g) {
      const auto& grid = comb.at(std::string(kRegionNames[g]));
      for (std::size_t pz = 0; pz < kPZones; ++pz) {
        for (std::size_t rz = 0; rz < kRZones; ++rz) {
          const auto name = grid.at(std::string(kPNames[pz])).at(std::string(kRNames[rz])).get<std::string>();
          t.grid_[g][pz][rz] = static_cast<CgClass>(index_of(kClassNames, name, "CG-EGA class"));
        }
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ArgumentError(std::string("malformed CG-EGA tables: ") + e.what());
  }
  return t;
}

PZone CgEgaTables::p_zone(double y_true, double y_pred, double rate_true) const {
  double delta = 0.0;
  for (const auto& [above, value] : delta_steps_) {
    if (std::abs(rate_true) > above) delta = std::max(delta, value);
  }
  return static_cast<PZone>(first_zone(p_zones_, p_fallback_, y_true, y_pred, delta));
}

RZone CgEgaTables::r_zone(double rate_true, double rate_pred) const {
  return static_cast<RZone>(first_zone(r_zones_, r_fallback_, rate_true, rate_pred, 0.0));
}

CgClass CgEgaTables::classify(PZone p, RZone r, Region region) const {
  return grid_[static_cast<std::size_t>(region)][static_cast<std::size_t>(p)][static_cast<std::size_t>(r)];
}

PZone p_ega(double y_true, double y_pred, double rate_true) {
  return CgEgaTables::builtin().p_zone(y_true, y_pred, rate_true);
}

RZone r_ega(double rate_true, double rate_pred) { return CgEgaTables::builtin().r_zone(rate_true, rate_pred); }

CgClass cg_ega_classify(PZone p, RZone r, Region region) { return CgEgaTables::builtin().classify(p, r, region); }

CgClass cg_ega_classify(std::string_view p, std::string_view r, std::string_view region) {
  return cg_ega_classify(parse_pzone(p), parse_rzone(r), parse_region(region));
}

void ClassCounts::add(CgClass c) {
  switch (c) {
    case CgClass::AP: ++ap; break;
    case CgClass::BE: ++be; break;
    case CgClass::EP: ++ep; break;
  }
}

std::optional<double> ClassCounts::rate(CgClass c) const {
  if (total() == 0) return std::nullopt;
  const std::size_t n = c == CgClass::AP ? ap : c == CgClass::BE ? be : ep;
  return static_cast<double>(n) / static_cast<double>(total());
}

CgEgaReport cg_ega_report(const PredictionSeries& s, const CgEgaTables& tables) {
  if (s.size() < 2) throw ArgumentError("cg_ega_report: at least 2 points are required");
  const auto rt = rates(s.time, s.y_true);
  const auto rp = rates(s.time, s.y_pred);
  CgEgaReport report;
  report.tables_version = tables.version();
  for (std::size_t k = 1; k < s.size(); ++k) {
    PointRecord p;
    p.time = s.time[k];
    p.y_true = s.y_true[k];
    p.y_pred = s.y_pred[k];
    p.rate_true = rt[k - 1];
    p.rate_pred = rp[k - 1];
    p.p_zone = tables.p_zone(p.y_true, p.y_pred, p.rate_true);
    p.r_zone = tables.r_zone(p.rate_true, p.rate_pred);
    p.region = region_of(p.y_true);
    p.cls = tables.classify(p.p_zone, p.r_zone, p.region);
    report.regions[static_cast<std::size_t>(p.region)].add(p.cls);
    report.overall.add(p.cls);
    ++report.p_histogram[static_cast<std::size_t>(p.p_zone)];
    ++report.r_histogram[static_cast<std::size_t>(p.r_zone)];
    report.points.push_back(p);
  }
  return report;
}

namespace {

nlohmann::json counts_json(const ClassCounts& c) {
  nlohmann::json j = {{"count", c.total()}, {"AP", c.ap}, {"BE", c.be}, {"EP", c.ep}};
  if (c.total() > 0) {
    j["rates"] = {{"AP", *c.rate(CgClass::AP)}, {"BE", *c.rate(CgClass::BE)}, {"EP", *c.rate(CgClass::EP)}};
  }
  return j;
}

}  // namespace

nlohmann::json to_json(const CgEgaReport& r) {
  nlohmann::json regions;
  for (std::size_t g = 0; g < kRegions; ++g) regions[std::string(kRegionNames[g])] = counts_json(r.regions[g]);
  nlohmann::json p_hist, r_hist;
  for (std::size_t k = 0; k < kPZones; ++k) p_hist[std::string(kPNames[k])] = r.p_histogram[k];
  for (std::size_t k = 0; k < kRZones; ++k) r_hist[std::string(kRNames[k])] = r.r_histogram[k];
  return {{"tables_version", r.tables_version},
          {"classified", r.overall.total()},
          {"overall", counts_json(r.overall)},
          {"regions", regions},
          {"p_ega", p_hist},
          {"r_ega", r_hist}};
}

void write_points_csv(std::ostream& out, const CgEgaReport& r) {
  out << "t,y_true,y_pred,rate_true,rate_pred,p_zone,r_zone,class,region\n";
  for (const PointRecord& p : r.points) {
    out << data::format_timestamp(p.time) << ',' << data::format_double(p.y_true) << ','
        << data::format_double(p.y_pred) << ',' << data::format_double(p.rate_true) << ','
        << data::format_double(p.rate_pred) << ',' << to_string(p.p_zone) << ',' << to_string(p.r_zone) << ','
        << to_string(p.cls) << ',' << to_string(p.region) << '\n';
  }
}

}  // namespace retain::eval
