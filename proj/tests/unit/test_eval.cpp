// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "retain/errors.hpp"
#include "retain/eval/cgega.hpp"
#include "retain/eval/metrics.hpp"
#include "support/cgega_oracle.hpp"

namespace ev = retain::eval;
namespace data = retain::data;
using ev::Minutes;

namespace {

ev::PredictionSeries series(const std::vector<double>& y, const std::vector<double>& yhat, Minutes step = 5) {
  ev::PredictionSeries s;
  for (std::size_t k = 0; k < y.size(); ++k) {
    s.time.push_back(1000 + static_cast<Minutes>(k) * step);
    s.y_true.push_back(y[k]);
    s.y_pred.push_back(yhat[k]);
  }
  return s;
}

std::string name(ev::PZone z) { return std::string(ev::to_string(z)); }
std::string name(ev::RZone z) { return std::string(ev::to_string(z)); }

}  // namespace

TEST(Metrics, Examples) {
  const auto same = series({100, 150, 200}, {100, 150, 200});
  EXPECT_EQ(ev::rmse(same), 0.0);
  EXPECT_EQ(ev::mape(same), 0.0);
  EXPECT_NEAR(ev::rmse(series({100, 150, 200}, {107, 157, 207})), 7.0, 1e-12);
  const auto s = series({100, 200}, {110, 180});
  EXPECT_NEAR(ev::rmse(s), std::sqrt(250.0), 1e-12);
  EXPECT_NEAR(ev::rmse(s), 15.811, 1e-3);
  EXPECT_NEAR(ev::mape(s), 10.0, 1e-12);
  EXPECT_THROW(ev::rmse(ev::PredictionSeries{}), retain::ArgumentError);
  EXPECT_THROW(ev::mape(ev::PredictionSeries{}), retain::ArgumentError);
  EXPECT_THROW(ev::mape(series({0.0}, {1.0})), retain::ArgumentError);
}

TEST(Metrics, RmseAndMapeProperties) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> g(40.0, 400.0), scale(0.1, 10.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> y(20), yhat(20);
    for (std::size_t k = 0; k < 20; ++k) {
      y[k] = g(rng);
      yhat[k] = trial % 10 == 0 ? y[k] : g(rng);
    }
    const auto s = series(y, yhat);
    const double r = ev::rmse(s);
    EXPECT_GE(r, 0.0);
    EXPECT_EQ(r == 0.0, y == yhat);
    const double c = scale(rng);
    auto scaled = s;
    for (std::size_t k = 0; k < 20; ++k) {
      scaled.y_true[k] *= c;
      scaled.y_pred[k] *= c;
    }
    EXPECT_NEAR(ev::mape(scaled), ev::mape(s), 1e-9 * std::max(1.0, ev::mape(s)));
  }
}

TEST(Rates, Examples) {
  EXPECT_EQ(ev::rates(std::vector<Minutes>{0, 5, 10}, std::vector<double>{100, 100, 100}),
            (std::vector<double>{0.0, 0.0}));
  EXPECT_EQ(ev::rates(std::vector<Minutes>{0, 5, 10}, std::vector<double>{100, 105, 110}),
            (std::vector<double>{1.0, 1.0}));
  const auto irregular = ev::rates(std::vector<Minutes>{0, 5, 15, 17}, std::vector<double>{100, 110, 100, 106});
  EXPECT_EQ(irregular, (std::vector<double>{2.0, -1.0, 3.0}));
  EXPECT_THROW(ev::rates(std::vector<Minutes>{0}, std::vector<double>{1}), retain::ArgumentError);
  EXPECT_THROW(ev::rates(std::vector<Minutes>{0, 0}, std::vector<double>{1, 2}), retain::ArgumentError);
}

TEST(Reconstruct, AffineRescaleSortedAndOrderIndependent) {
  data::Scaling identity{{0, 0, 0}, {1, 1, 1}, 0.0, 1.0};
  const std::vector<ev::TimedValue> targets{{10, 1.0}, {20, 2.0}, {30, 3.0}};
  const std::vector<ev::TimedValue> preds{{30, 3.5}, {10, 1.5}, {20, 2.5}};
  const auto s = ev::reconstruct(preds, targets, identity);
  EXPECT_EQ(s.time, (std::vector<Minutes>{10, 20, 30}));
  EXPECT_EQ(s.y_pred, (std::vector<double>{1.5, 2.5, 3.5}));
  EXPECT_EQ(s.y_true, (std::vector<double>{1.0, 2.0, 3.0}));

  data::Scaling sc{{0, 0, 0}, {1, 1, 1}, 100.0, 10.0};
  const std::vector<ev::TimedValue> one{{10, 0.5}};
  EXPECT_DOUBLE_EQ(ev::reconstruct(one, targets, sc).y_pred[0], 105.0);

  std::vector<ev::TimedValue> shuffled = preds;
  std::mt19937_64 rng(2);
  for (int k = 0; k < 5; ++k) {
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    const auto t = ev::reconstruct(shuffled, targets, sc);
    EXPECT_EQ(t.y_pred, ev::reconstruct(preds, targets, sc).y_pred);
  }
}

TEST(Reconstruct, LaterDuplicateWinsAndUnknownTimestampRejected) {
  data::Scaling identity{{0}, {1}, 0.0, 1.0};
  const std::vector<ev::TimedValue> targets{{10, 1.0}, {20, 2.0}};
  const std::vector<ev::TimedValue> preds{{10, 1.5}, {20, 2.5}, {10, 9.0}};
  const auto s = ev::reconstruct(preds, targets, identity);
  EXPECT_EQ(s.y_pred, (std::vector<double>{9.0, 2.5}));
  const std::vector<ev::TimedValue> unknown{{15, 1.0}};
  EXPECT_THROW(ev::reconstruct(unknown, targets, identity), retain::ArgumentError);
}

TEST(Reconstruct, InvertsTargetStandardization) {
  data::Scaling sc{{0}, {1}, 143.7, 31.2};
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> g(40.0, 400.0);
  std::vector<ev::TimedValue> targets;
  std::vector<double> raw;
  for (Minutes t = 0; t < 50; ++t) {
    raw.push_back(g(rng));
    targets.push_back({t * 5, data::standardize_target(raw.back(), sc)});
  }
  const auto s = ev::reconstruct(targets, targets, sc);
  for (std::size_t k = 0; k < raw.size(); ++k) {
    EXPECT_NEAR(s.y_true[k], raw[k], 1e-12 * raw[k]);
    EXPECT_EQ(s.y_pred[k], s.y_true[k]);
  }
}

TEST(PEga, Examples) {
  EXPECT_EQ(ev::p_ega(100, 100, 0), ev::PZone::A);
  EXPECT_EQ(ev::p_ega(50, 200, 0), ev::PZone::E);
  EXPECT_EQ(ev::p_ega(100, 118, 0), ev::PZone::A);
  EXPECT_EQ(ev::p_ega(250, 60, 0), ev::PZone::E);
  EXPECT_EQ(ev::p_ega(100, 220, 0), ev::PZone::C);
  EXPECT_EQ(ev::p_ega(300, 150, 0), ev::PZone::D);
  EXPECT_EQ(ev::p_ega(50, 150, 0), ev::PZone::D);
  EXPECT_EQ(ev::p_ega(100, 135, 0), ev::PZone::B);
}

TEST(PEga, RateWidensUpperBoundaries) {
  EXPECT_EQ(ev::p_ega(50, 185, 0.0), ev::PZone::E);
  EXPECT_EQ(ev::p_ega(50, 185, 1.5), ev::PZone::D);
  EXPECT_EQ(ev::p_ega(50, 195, 1.5), ev::PZone::E);
  EXPECT_EQ(ev::p_ega(50, 195, -2.5), ev::PZone::D);
  EXPECT_EQ(ev::p_ega(100, 215, 0.0), ev::PZone::C);
  EXPECT_EQ(ev::p_ega(100, 215, 1.5), ev::PZone::B);
}

TEST(REga, Examples) {
  EXPECT_EQ(ev::r_ega(0.7, 0.7), ev::RZone::A);
  EXPECT_EQ(ev::r_ega(-3, 3), ev::RZone::uE);
  EXPECT_EQ(ev::r_ega(3, -3), ev::RZone::lE);
  // A flat reference with a steep predicted rise is an upper C error in this grid.
  EXPECT_EQ(ev::r_ega(0, 4), ev::RZone::uC);
  EXPECT_EQ(ev::r_ega(0, -4), ev::RZone::lC);
  EXPECT_EQ(ev::r_ega(-3, 0), ev::RZone::uD);
  EXPECT_EQ(ev::r_ega(3, 0), ev::RZone::lD);
  EXPECT_EQ(ev::r_ega(2, 3.5), ev::RZone::B);
  EXPECT_EQ(ev::r_ega(10, 11.8), ev::RZone::A);
}

TEST(CgEga, CombinationExamplesAndUnknownNames) {
  EXPECT_EQ(ev::cg_ega_classify("A", "A", "eu"), ev::CgClass::AP);
  for (const char* r : {"A", "B", "uC", "lC", "uD", "lD", "uE", "lE"}) {
    EXPECT_EQ(ev::cg_ega_classify("E", r, "hypo"), ev::CgClass::EP);
  }
  EXPECT_EQ(ev::cg_ega_classify("A", "uC", "eu"), ev::CgClass::BE);
  EXPECT_THROW(ev::cg_ega_classify("F", "A", "eu"), retain::ArgumentError);
  EXPECT_THROW(ev::cg_ega_classify("A", "uF", "eu"), retain::ArgumentError);
  EXPECT_THROW(ev::cg_ega_classify("A", "A", "normal"), retain::ArgumentError);
}

TEST(CgEga, TablesAgreeWithBranchingOracleOnAGrid) {
  std::size_t checked = 0;
  for (int x = 20; x <= 600; x += 6) {
    for (int y = 20; y <= 600; y += 6) {
      for (int k = -50; k <= 50; k += 5) {
        const double rate = k / 10.0;
        ASSERT_EQ(name(ev::p_ega(x, y, rate)), oracle::p_zone(x, y, rate)) << x << "," << y << "," << rate;
        ++checked;
      }
    }
  }
  for (int a = -50; a <= 50; ++a) {
    for (int b = -50; b <= 50; ++b) {
      const double rt = a / 10.0, rp = b / 10.0;
      ASSERT_EQ(name(ev::r_ega(rt, rp)), oracle::r_zone(rt, rp)) << rt << "," << rp;
    }
  }
  for (const char* region : {"hypo", "eu", "hyper"})
    for (const char* p : {"A", "B", "C", "D", "E"})
      for (const char* r : {"A", "B", "uC", "lC", "uD", "lD", "uE", "lE"})
        EXPECT_EQ(std::string(ev::to_string(ev::cg_ega_classify(p, r, region))), oracle::combine(p, r, region));
  EXPECT_GT(checked, 100000U);
}

TEST(CgEga, NonAccurateRateZonesDoNotOverlap) {
  for (int a = -80; a <= 80; ++a) {
    for (int b = -80; b <= 80; ++b) {
      const double x = a / 10.0, y = b / 10.0;
      const bool flat_x = x >= -1 && x <= 1, flat_y = y >= -1 && y <= 1;
      const int hits = (x < -1 && y > 1) + (x > 1 && y < -1) + (flat_x && y - x > 2) + (flat_x && y - x < -2) +
                       (flat_y && x - y < -2) + (flat_y && x - y > 2);
      EXPECT_LE(hits, 1) << x << "," << y;
    }
  }
}

TEST(CgEgaReport, PerfectConstantPredictionIsAllAccurate) {
  for (double level : {55.0, 120.0, 250.0}) {
    const std::vector<double> y(30, level);
    const auto r = ev::cg_ega_report(series(y, y));
    EXPECT_EQ(r.overall.total(), 29U);
    EXPECT_EQ(*r.overall.rate(ev::CgClass::AP), 1.0);
    const auto region = static_cast<std::size_t>(ev::region_of(level));
    for (std::size_t g = 0; g < ev::kRegions; ++g) EXPECT_EQ(r.regions[g].total(), g == region ? 29U : 0U);
    const auto j = ev::to_json(r);
    for (const char* name : {"hypo", "eu", "hyper"}) {
      if (std::string(name) == ev::to_string(ev::region_of(level))) {
        EXPECT_EQ(j["regions"][name]["rates"]["AP"], 1.0);
      } else {
        EXPECT_EQ(j["regions"][name]["count"], 0);
        EXPECT_FALSE(j["regions"][name].contains("rates"));
      }
    }
  }
}

TEST(CgEgaReport, CountsAndRatesAreConsistent) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> step(0.0, 8.0), err(0.0, 25.0);
  std::vector<double> y{120.0}, yhat{125.0};
  for (int k = 1; k < 400; ++k) {
    y.push_back(std::clamp(y.back() + step(rng), 40.0, 400.0));
    yhat.push_back(std::clamp(y.back() + err(rng), 40.0, 400.0));
  }
  const auto s = series(y, yhat);
  const auto r = ev::cg_ega_report(s);
  EXPECT_EQ(r.overall.total(), y.size() - 1);
  std::size_t regions = 0;
  for (const auto& c : r.regions) {
    regions += c.total();
    if (c.total() > 0) {
      EXPECT_NEAR(*c.rate(ev::CgClass::AP) + *c.rate(ev::CgClass::BE) + *c.rate(ev::CgClass::EP), 1.0, 1e-12);
    }
  }
  EXPECT_EQ(regions, y.size() - 1);
  std::size_t ph = 0, rh = 0;
  for (auto n : r.p_histogram) ph += n;
  for (auto n : r.r_histogram) rh += n;
  EXPECT_EQ(ph, y.size() - 1);
  EXPECT_EQ(rh, y.size() - 1);
  for (const auto& p : r.points) {
    EXPECT_EQ(name(p.p_zone), oracle::p_zone(p.y_true, p.y_pred, p.rate_true));
    EXPECT_EQ(name(p.r_zone), oracle::r_zone(p.rate_true, p.rate_pred));
    EXPECT_EQ(std::string(ev::to_string(p.cls)),
              oracle::combine(name(p.p_zone), name(p.r_zone), oracle::region(p.y_true)));
  }
  std::ostringstream csv;
  ev::write_points_csv(csv, r);
  const std::string text = csv.str();
  EXPECT_EQ(static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')), y.size());
  EXPECT_THROW(ev::cg_ega_report(series({100}, {100})), retain::ArgumentError);
}

TEST(CgEgaTables, ReplaceableAndValidated) {
  auto doc = nlohmann::json::parse(R"({"version":"v","p_ega":{"order":[],"fallback":"B","delta":[]},
      "r_ega":{"order":[],"fallback":"A"},"combination":{}})");
  EXPECT_THROW(ev::CgEgaTables::from_json(doc), retain::ArgumentError);
  nlohmann::json grid;
  for (const char* p : {"A", "B", "C", "D", "E"})
    for (const char* r : {"A", "B", "uC", "lC", "uD", "lD", "uE", "lE"}) grid[p][r] = "BE";
  doc["combination"] = {{"hypo", grid}, {"eu", grid}, {"hyper", grid}};
  const auto t = ev::CgEgaTables::from_json(doc);
  EXPECT_EQ(t.p_zone(100, 500, 0), ev::PZone::B);
  EXPECT_EQ(t.r_zone(0, 5), ev::RZone::A);
  EXPECT_EQ(t.classify(ev::PZone::A, ev::RZone::A, ev::Region::Eu), ev::CgClass::BE);
  EXPECT_EQ(ev::CgEgaTables::builtin().version(), "cgega-tables-1");
  doc["p_ega"]["order"] = {"Q"};
  EXPECT_THROW(ev::CgEgaTables::from_json(doc), retain::ArgumentError);
}
