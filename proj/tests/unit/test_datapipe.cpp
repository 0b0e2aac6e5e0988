// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <sstream>

#include "retain/data/archive.hpp"
#include "retain/data/pipeline.hpp"
#include "retain/errors.hpp"

namespace data = retain::data;
using data::GlucoseSeries;
using data::Minutes;
using data::Sample;
using retain::num::Matrix;

namespace {

constexpr double NaN = data::kMissing;
const Minutes kStart = data::parse_timestamp("2021-03-01T00:00");

GlucoseSeries grid_series(const std::vector<double>& glucose, Minutes period = 5) {
  GlucoseSeries s;
  s.patient_id = "p";
  for (std::size_t k = 0; k < glucose.size(); ++k)
    s.push_back(kStart + static_cast<Minutes>(k) * period, glucose[k], 0.0, 0.0);
  return s;
}

// Smooth gap-free series with occasional meals and boluses.
GlucoseSeries smooth_series(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  GlucoseSeries s;
  s.patient_id = "smooth";
  for (std::size_t k = 0; k < n; ++k) {
    const double g = 140.0 + 40.0 * std::sin(static_cast<double>(k) / 20.0) + 5.0 * u(rng);
    s.push_back(kStart + static_cast<Minutes>(k) * 5, g, k % 50 == 7 ? 40.0 : 0.0, k % 50 == 9 ? 4.0 : 0.0);
  }
  return s;
}

std::vector<Sample> ordered_samples(std::size_t n, Minutes step = 5) {
  std::vector<Sample> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    out[k].x = Matrix(3, 3, static_cast<double>(k));
    out[k].y = 100.0 + static_cast<double>(k);
    out[k].anchor_time = kStart + static_cast<Minutes>(k) * step;
    out[k].target_time = out[k].anchor_time + 30;
  }
  return out;
}

bool same_samples(const std::vector<Sample>& a, const std::vector<Sample>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (!(a[k].x == b[k].x) || a[k].y != b[k].y || a[k].target_time != b[k].target_time ||
        a[k].anchor_time != b[k].anchor_time)
      return false;
  }
  return true;
}

// Fill rule written directly from its description: nearest known neighbours on each side.
std::vector<double> recover_oracle(const std::vector<double>& g) {
  std::vector<double> out = g;
  const auto n = static_cast<long>(g.size());
  for (long i = 0; i < n; ++i) {
    if (!std::isnan(g[i])) continue;
    long left = i - 1, right = i + 1;
    while (left >= 0 && std::isnan(g[left])) --left;
    while (right < n && std::isnan(g[right])) ++right;
    long a, b;
    if (left >= 0 && right < n) {
      a = left;
      b = right;
    } else if (left < 0) {
      a = right;
      b = right + 1;
      while (std::isnan(g[b])) ++b;
    } else {
      b = left;
      a = left - 1;
      while (std::isnan(g[a])) --a;
    }
    out[i] = g[a] + (g[b] - g[a]) * static_cast<double>(i - a) / static_cast<double>(b - a);
  }
  return out;
}

}  // namespace

TEST(Timestamps, RoundTripAndCalendar) {
  EXPECT_EQ(data::parse_timestamp("1970-01-01T00:00:00"), 0);
  EXPECT_EQ(data::parse_timestamp("1970-01-02 00:01"), 1441);
  EXPECT_EQ(data::format_timestamp(data::parse_timestamp("2020-02-29T23:59:41")), "2020-02-29T23:59:00");
  EXPECT_EQ(data::parse_timestamp("2020-03-01T00:00") - data::parse_timestamp("2020-02-28T00:00"), 2 * 1440);
  EXPECT_EQ(data::parse_timestamp("2021-05-04T10:20:30.250"), data::parse_timestamp("2021-05-04T10:20"));
  for (const char* bad : {"2021-02-29T00:00", "2021-01-01", "2021-01-01T24:00", "x021-01-01T00:00", "2021-01-01T00:00Z"}) {
    EXPECT_THROW(data::parse_timestamp(bad), retain::IngestionError) << bad;
  }
}

TEST(SeriesCsv, ReadsMissingFieldsAndRoundTrips) {
  std::istringstream in(
      "datetime,glucose,CHO,insulin\n2021-01-01T00:00:00,100,,\n2021-01-01T00:05:00,,30,\r\n"
      "2021-01-01T00:10:00,110.5,0,2.5\n");
  const auto s = data::read_series_csv(in, "p1");
  ASSERT_EQ(s.size(), 3U);
  EXPECT_TRUE(data::is_missing(s.glucose[1]));
  EXPECT_EQ(s.cho[1], 30.0);
  EXPECT_EQ(s.insulin[0], 0.0);
  EXPECT_EQ(s.insulin[2], 2.5);
  std::ostringstream out;
  data::write_series_csv(out, s);
  std::istringstream back(out.str());
  EXPECT_EQ(data::read_series_csv(back, "p1"), s);
}

TEST(SeriesCsv, RejectsMalformedInput) {
  auto read = [](const std::string& text) {
    std::istringstream in(text);
    return data::read_series_csv(in, "p");
  };
  EXPECT_THROW(read("time,glucose,CHO,insulin\n"), retain::IngestionError);
  EXPECT_THROW(read("datetime,glucose,CHO,insulin\n2021-01-01T00:00,100,0,0\n2021-01-01T00:00,101,0,0\n"),
               retain::IngestionError);
  EXPECT_THROW(read("datetime,glucose,CHO,insulin\n2021-01-01T00:00,700,0,0\n"), retain::IngestionError);
  EXPECT_THROW(read("datetime,glucose,CHO,insulin\n2021-01-01T00:00,abc,0,0\n"), retain::IngestionError);
  EXPECT_THROW(read("datetime,glucose,CHO,insulin\n2021-01-01T00:00,100,-1,0\n"), retain::IngestionError);
  EXPECT_THROW(read("datetime,glucose,CHO,insulin\n2021-01-01T00:00,100,0\n"), retain::IngestionError);
}

TEST(CleanSpikes, Examples) {
  const auto ramp = grid_series({100, 120, 140, 160, 180});
  EXPECT_EQ(data::clean_spikes(ramp, 50.0), ramp);

  const auto spike = data::clean_spikes(grid_series({100, 300, 102}), 50.0);
  EXPECT_TRUE(data::is_missing(spike.glucose[1]));
  EXPECT_EQ(spike.glucose[0], 100.0);
  EXPECT_EQ(spike.glucose[2], 102.0);

  const auto rise = grid_series({100, 130, 160, 190});
  EXPECT_EQ(data::clean_spikes(rise, 50.0), rise);
}

TEST(CleanSpikes, KeepsEndpointsStepsAndSmallJumps) {
  const auto edge = grid_series({300, 100, 102, 40});
  EXPECT_EQ(data::clean_spikes(edge, 50.0), edge);
  const auto step = grid_series({100, 200, 300, 310});
  EXPECT_EQ(data::clean_spikes(step, 50.0), step);
  const auto small = grid_series({100, 149, 100});
  EXPECT_EQ(data::clean_spikes(small, 50.0), small);
  const auto beside_gap = grid_series({100, NaN, 300, 100});
  EXPECT_EQ(data::clean_spikes(beside_gap, 50.0), beside_gap);
}

TEST(CleanSpikes, IdempotentOnRandomSeries) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> g(40.0, 400.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> v(30);
    for (double& x : v) x = g(rng);
    const auto once = data::clean_spikes(grid_series(v), 50.0);
    EXPECT_EQ(data::clean_spikes(once, 50.0), once);
  }
}

TEST(Resample, OnGridSeriesIsUnchanged) {
  const auto s = smooth_series(50, 2);
  EXPECT_EQ(data::resample(s, 5), s);
}

TEST(Resample, FifteenMinuteReadingsLeaveGaps) {
  const auto r = data::resample(grid_series({100, 110, 120, 130, 140}, 15), 5);
  ASSERT_EQ(r.size(), 13U);
  std::size_t filled = 0;
  for (double g : r.glucose) filled += data::is_missing(g) ? 0 : 1;
  EXPECT_EQ(filled, 5U);
  EXPECT_EQ(r.glucose[3], 110.0);
  EXPECT_EQ(r.time.back() - r.time.front(), 60);
}

TEST(Resample, EventMassIsSummedIntoOneSlot) {
  GlucoseSeries s;
  s.push_back(kStart, 100, 20, 1);
  s.push_back(kStart + 1, NaN, 30, 0.5);
  s.push_back(kStart + 9, 105, 0, 0);
  const auto r = data::resample(s, 5);
  ASSERT_EQ(r.size(), 3U);
  EXPECT_EQ(r.cho[0], 50.0);
  EXPECT_EQ(r.insulin[0], 1.5);
  EXPECT_TRUE(data::is_missing(r.glucose[1]));
  EXPECT_EQ(r.glucose[2], 105.0);
}

TEST(Resample, NearestSlotTiesToEarlierAndClosestReadingWins) {
  GlucoseSeries s;
  s.push_back(kStart, 100, 0, 0);
  s.push_back(kStart + 5, 150, 0, 0);   // exactly between slots 0 and 10
  s.push_back(kStart + 18, 170, 0, 0);  // slot 20, distance 2
  s.push_back(kStart + 21, 180, 0, 0);  // slot 20, distance 1
  const auto r = data::resample(s, 10);
  ASSERT_EQ(r.size(), 3U);
  EXPECT_EQ(r.glucose[0], 100.0);  // the exact reading is closer than the tie
  EXPECT_TRUE(data::is_missing(r.glucose[1]));
  EXPECT_EQ(r.glucose[2], 180.0);

  GlucoseSeries t;
  t.push_back(kStart + 2, NaN, 0, 0);
  t.push_back(kStart + 7, 120, 0, 0);  // offset 5 from the first stamp, a tie between slots 0 and 1
  t.push_back(kStart + 12, 130, 0, 0);
  const auto q = data::resample(t, 10);
  EXPECT_EQ(q.glucose[0], 120.0);
  EXPECT_EQ(q.glucose[1], 130.0);
}

TEST(Resample, MassPreservedAndDuplicatesRejected) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> gap(1, 9);
  std::uniform_real_distribution<double> c(0.0, 30.0);
  GlucoseSeries s;
  Minutes t = kStart;
  double cho = 0.0, ins = 0.0;
  for (int k = 0; k < 300; ++k) {
    t += gap(rng);
    const double a = c(rng), b = c(rng) / 10.0;
    cho += a;
    ins += b;
    s.push_back(t, 100.0 + k % 7, a, b);
  }
  const auto r = data::resample(s, 5);
  double rc = 0.0, ri = 0.0;
  for (std::size_t k = 0; k < r.size(); ++k) {
    rc += r.cho[k];
    ri += r.insulin[k];
  }
  EXPECT_NEAR(rc, cho, 1e-9);
  EXPECT_NEAR(ri, ins, 1e-9);
  EXPECT_EQ(data::resample(r, 5), r);

  s.time[10] = s.time[9];
  EXPECT_THROW(data::resample(s, 5), retain::IngestionError);
}

TEST(BuildSamples, BoundaryCounts) {
  const std::size_t L = 37, PH = 6;
  EXPECT_EQ(data::build_samples(smooth_series(L + PH, 1), L, PH).size(), 1U);
  EXPECT_TRUE(data::build_samples(smooth_series(L + PH - 1, 1), L, PH).empty());
  for (std::size_t n : {43U, 44U, 100U, 1000U}) {
    EXPECT_EQ(data::build_samples(smooth_series(n, 1), L, PH).size(), n - L - PH + 1);
  }
}

TEST(BuildSamples, WindowContentAndTimes) {
  const auto s = smooth_series(20, 4);
  const auto samples = data::build_samples(s, 5, 2);
  ASSERT_EQ(samples.size(), 14U);
  const Sample& x = samples[3];  // last window row is grid index 7
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_EQ(x.x(i, data::kGlucose), s.glucose[3 + i]);
    EXPECT_EQ(x.x(i, data::kCho), s.cho[3 + i]);
    EXPECT_EQ(x.x(i, data::kInsulin), s.insulin[3 + i]);
  }
  EXPECT_EQ(x.y, s.glucose[9]);
  EXPECT_EQ(x.anchor_time, s.time[7]);
  EXPECT_EQ(x.target_time, s.time[9]);
}

TEST(RecoverMissing, Examples) {
  auto one = [](std::vector<double> g, double y) {
    Sample s;
    s.x = Matrix(g.size(), 3);
    for (std::size_t i = 0; i < g.size(); ++i) s.x(i, 0) = g[i];
    s.y = y;
    return s;
  };
  const std::vector<Sample> in{one({100, NaN, 120}, 1), one({100, 110, NaN}, 2), one({100, 110, 120}, NaN),
                               one({NaN, 110, NaN}, 3), one({NaN, NaN, 130, 125}, 4)};
  const auto out = data::recover_missing(in);
  ASSERT_EQ(out.size(), 3U);
  EXPECT_DOUBLE_EQ(out[0].x(1, 0), 110.0);
  EXPECT_DOUBLE_EQ(out[1].x(2, 0), 120.0);
  EXPECT_DOUBLE_EQ(out[2].x(0, 0), 140.0);
  EXPECT_DOUBLE_EQ(out[2].x(1, 0), 135.0);
  EXPECT_EQ(out[0].y, 1.0);
  EXPECT_EQ(out[2].y, 4.0);
}

TEST(RecoverMissing, MatchesNeighbourSearchOracle) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> g(50.0, 300.0), u(0.0, 1.0);
  std::size_t kept = 0;
  for (int trial = 0; trial < 500; ++trial) {
    Sample s;
    s.x = Matrix(12, 3);
    std::vector<double> col(12);
    const double p_missing = u(rng);
    for (std::size_t i = 0; i < 12; ++i) {
      col[i] = u(rng) < p_missing ? NaN : g(rng);
      s.x(i, 0) = col[i];
      s.x(i, 1) = g(rng);
    }
    s.y = g(rng);
    const auto out = data::recover_missing(std::vector<Sample>{s});
    const auto known = std::count_if(col.begin(), col.end(), [](double v) { return !std::isnan(v); });
    if (known < 2) {
      EXPECT_TRUE(out.empty());
      continue;
    }
    ++kept;
    ASSERT_EQ(out.size(), 1U);
    const auto want = recover_oracle(col);
    for (std::size_t i = 0; i < 12; ++i) {
      EXPECT_NEAR(out[0].x(i, 0), want[i], 1e-9);
      if (!std::isnan(col[i])) EXPECT_EQ(out[0].x(i, 0), col[i]);
      EXPECT_EQ(out[0].x(i, 1), s.x(i, 1));
    }
    EXPECT_EQ(out[0].y, s.y);
    EXPECT_TRUE(same_samples(data::recover_missing(out), out));
  }
  EXPECT_GT(kept, 300U);
}

TEST(RecoverMissing, EveryTargetIsASensorReading) {
  auto s = smooth_series(400, 6);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (double& g : s.glucose) {
    if (u(rng) < 0.15) g = NaN;
  }
  const auto grid = data::resample(s, 5);
  const auto samples = data::recover_missing(data::build_samples(grid, 37, 6));
  EXPECT_FALSE(samples.empty());
  for (const auto& x : samples) {
    const auto k = static_cast<std::size_t>((x.target_time - grid.time.front()) / 5);
    ASSERT_FALSE(data::is_missing(grid.glucose[k]));
    EXPECT_EQ(x.y, grid.glucose[k]);
  }
}

TEST(Split, IndexArithmeticAndTestPredicate) {
  // 1000 samples ahead of a 5-day test block.
  std::vector<Sample> samples = ordered_samples(1000, 5);
  const Minutes end = samples.back().target_time;
  for (int k = 1; k <= 300; ++k) {
    Sample s = samples.back();
    s.target_time = end + 5 * 1440 * k / 300;
    s.anchor_time = s.target_time - 30;
    samples.push_back(s);
  }
  const auto sp = data::split(samples, {5.0, 0.2});
  EXPECT_EQ(sp.test.size(), 300U);
  EXPECT_EQ(sp.train.size(), 800U);
  EXPECT_EQ(sp.valid.size(), 200U);
  EXPECT_EQ(sp.train.back().y, samples[799].y);
  EXPECT_EQ(sp.valid.front().y, samples[800].y);
  for (const auto& s : sp.test) EXPECT_GT(s.target_time, samples.back().target_time - 5 * 1440);
  for (const auto& s : sp.valid) EXPECT_LE(s.target_time, samples.back().target_time - 5 * 1440);
}

TEST(Split, UniformFifteenDaysAndDegenerateCases) {
  const auto samples = ordered_samples(15 * 288, 5);
  const auto sp = data::split(samples, {5.0, 0.2});
  const Minutes last = samples.back().target_time;
  for (const auto& s : sp.test) EXPECT_GT(s.target_time, last - 5 * 1440);
  EXPECT_EQ(sp.test.size(), 5U * 288U);
  EXPECT_EQ(sp.train.size() + sp.valid.size() + sp.test.size(), samples.size());

  EXPECT_THROW(data::split(samples, {20.0, 0.2}), retain::ConfigurationError);
  EXPECT_THROW(data::split(ordered_samples(5), {1.0, 0.2}), retain::ConfigurationError);
  EXPECT_THROW(data::split(samples, {5.0, 1.0}), retain::ConfigurationError);
  auto shuffled = samples;
  std::swap(shuffled[3], shuffled[40]);
  EXPECT_THROW(data::split(shuffled, {5.0, 0.2}), retain::ArgumentError);
}

TEST(Split, KFoldRotatesValidationOverTheNonTestPeriod) {
  const auto samples = ordered_samples(15 * 288, 5);
  const auto base = data::split(samples, {5.0, 0.2});
  const auto folds = data::kfold_splits(samples, {5.0, 0.2}, 5);
  ASSERT_EQ(folds.size(), 5U);
  std::vector<int> seen(samples.size(), 0);
  for (const auto& f : folds) {
    EXPECT_TRUE(same_samples(f.test, base.test));
    EXPECT_EQ(f.train.size() + f.valid.size(), base.train.size() + base.valid.size());
    for (const auto& s : f.valid) ++seen[static_cast<std::size_t>(s.y - 100.0)];
  }
  for (std::size_t k = 0; k < base.train.size() + base.valid.size(); ++k) EXPECT_EQ(seen[k], 1);
}

TEST(Standardize, TrainMomentsFallbackAndRoundTrip) {
  const auto samples = data::prepare_samples(smooth_series(3000, 8), {});
  auto sp = data::split(samples, {2.0, 0.2});
  for (auto* part : {&sp.train, &sp.valid, &sp.test})
    for (auto& s : *part)
      for (std::size_t i = 0; i < s.x.rows(); ++i) s.x(i, data::kCho) = 0.0;
  const auto st = data::standardize(sp);
  double sum = 0.0, sq = 0.0, n = 0.0;
  for (const auto& s : st.splits.train) {
    for (std::size_t i = 0; i < s.x.rows(); ++i) {
      sum += s.x(i, data::kGlucose);
      sq += s.x(i, data::kGlucose) * s.x(i, data::kGlucose);
      n += 1.0;
      EXPECT_EQ(s.x(i, data::kCho), 0.0);
    }
  }
  EXPECT_NEAR(sum / n, 0.0, 1e-9);
  EXPECT_NEAR(sq / n - (sum / n) * (sum / n), 1.0, 1e-9);
  EXPECT_EQ(st.scaling.mean[data::kCho], 0.0);
  EXPECT_EQ(st.scaling.std[data::kCho], 1.0);

  for (std::size_t k = 0; k < sp.test.size(); ++k) {
    const Matrix back = data::destandardize_window(st.splits.test[k].x, st.scaling);
    EXPECT_LE(retain::num::max_abs_diff(back, sp.test[k].x), 1e-12 * 400.0);
    EXPECT_NEAR(data::destandardize_target(st.splits.test[k].y, st.scaling), sp.test[k].y, 1e-12 * 400.0);
  }
  EXPECT_THROW(data::standardize(data::SplitSamples{}), retain::ArgumentError);
}

TEST(Leakage, TestDataNeverInfluencesTrainOrValid) {
  const auto raw = smooth_series(15 * 288, 9);
  const data::SplitSpec spec{5.0, 0.2};
  const auto base_samples = data::prepare_samples(raw, {});
  const auto base = data::standardize(data::split(base_samples, spec));

  // Perturb every raw reading inside the test period.
  const Minutes cutoff = base_samples.back().target_time - 5 * 1440;
  auto perturbed = raw;
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> g(45.0, 390.0);
  for (std::size_t k = 0; k < perturbed.size(); ++k) {
    if (perturbed.time[k] > cutoff) {
      perturbed.glucose[k] = g(rng);
      perturbed.cho[k] = g(rng) / 10.0;
    }
  }
  const auto other = data::standardize(data::split(data::prepare_samples(perturbed, {}), spec));
  EXPECT_EQ(other.scaling, base.scaling);
  EXPECT_TRUE(same_samples(other.splits.train, base.splits.train));
  EXPECT_TRUE(same_samples(other.splits.valid, base.splits.valid));
  EXPECT_FALSE(same_samples(other.splits.test, base.splits.test));

  // Permuting the test samples themselves changes nothing upstream either.
  auto sp = data::split(base_samples, spec);
  std::shuffle(sp.test.begin(), sp.test.end(), rng);
  const auto permuted = data::standardize(sp);
  EXPECT_EQ(permuted.scaling, base.scaling);
  EXPECT_TRUE(same_samples(permuted.splits.train, base.splits.train));
  EXPECT_TRUE(same_samples(permuted.splits.valid, base.splits.valid));
}

TEST(Pipeline, GapFreeCountAndIdempotence) {
  for (std::size_t n : {43U, 500U, 2016U}) {
    EXPECT_EQ(data::prepare_samples(smooth_series(n, 11), {}).size(), n - 37 - 6 + 1);
  }
  auto s = smooth_series(600, 12);
  s.glucose[100] = 400.0;
  s.glucose[200] = NaN;
  const auto cleaned = data::resample(data::clean_spikes(s, 50.0), 5);
  EXPECT_TRUE(data::is_missing(cleaned.glucose[100]));
  EXPECT_EQ(data::resample(data::clean_spikes(cleaned, 50.0), 5), cleaned);
  const auto samples = data::prepare_samples(s, {});
  EXPECT_TRUE(same_samples(data::recover_missing(samples), samples));
}

TEST(Archive, RoundTripsThroughDisk) {
  const auto samples = data::prepare_samples(smooth_series(15 * 288, 13), {});
  const auto st = data::standardize(data::split(samples, {5.0, 0.2}));
  const auto dir = std::filesystem::temp_directory_path() / "retain_archive_test";
  std::filesystem::remove_all(dir);
  data::write_archive(dir, st, {"p7", {}, st.scaling});
  const auto back = data::read_archive(dir);
  EXPECT_EQ(back.meta.patient_id, "p7");
  EXPECT_EQ(back.meta.scaling, st.scaling);
  EXPECT_EQ(back.meta.pipeline.seq_len, 37U);
  EXPECT_TRUE(same_samples(back.splits.train, st.splits.train));
  EXPECT_TRUE(same_samples(back.splits.valid, st.splits.valid));
  EXPECT_TRUE(same_samples(back.splits.test, st.splits.test));
  std::filesystem::remove(dir / "valid.csv");
  EXPECT_THROW(data::read_archive(dir), retain::MissingInputError);
  std::filesystem::remove_all(dir);
  EXPECT_THROW(data::read_archive(dir), retain::MissingInputError);
}

TEST(Archive, RejectsWrongWidth) {
  data::PipelineConfig cfg;
  cfg.seq_len = 2;
  std::istringstream in(
      "timestamp,glucose_0,glucose_1,cho_0,cho_1,insulin_0,insulin_1,target\n2021-01-01T00:30:00,1,2,3,4,5,6\n");
  EXPECT_THROW(data::read_samples_csv(in, cfg), retain::IngestionError);
}
