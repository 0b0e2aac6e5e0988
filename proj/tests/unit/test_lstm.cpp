// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <random>

#include "retain/errors.hpp"
#include "retain/num/gradcheck.hpp"
#include "retain/num/lstm.hpp"
#include "support/convert.hpp"

namespace num = retain::num;
using num::Matrix;

namespace {

oracle::Lstm to_oracle(const num::LstmParams& p) {
  return {testutil::to_nested(p.w), testutil::to_nested(p.u), testutil::to_vec(p.b)};
}

num::LstmParams random_lstm(std::size_t in, std::size_t hidden, std::mt19937_64& rng) {
  return {testutil::random_matrix(4 * hidden, in, rng, 0.8), testutil::random_matrix(4 * hidden, hidden, rng, 0.8),
          testutil::random_matrix(4 * hidden, 1, rng, 0.5)};
}

}  // namespace

TEST(Lstm, ZeroWeightsGiveZeroOutputs) {
  std::mt19937_64 rng(5);
  const auto out = num::lstm_forward(testutil::random_matrix(6, 3, rng, 5.0), num::make_lstm(3, 4));
  for (double v : out.values()) EXPECT_EQ(v, 0.0);
}

TEST(Lstm, SingleStepIgnoresDirection) {
  std::mt19937_64 rng(6);
  const auto p = random_lstm(3, 4, rng);
  const Matrix x = testutil::random_matrix(1, 3, rng);
  EXPECT_EQ(num::lstm_forward(x, p, false), num::lstm_forward(x, p, true));
}

TEST(Lstm, TwoStepsMatchStraightLineCell) {
  std::mt19937_64 rng(7);
  const auto p = random_lstm(3, 2, rng);
  const Matrix x = testutil::random_matrix(2, 3, rng);
  const auto expected = oracle::lstm_run(to_oracle(p), testutil::to_nested(x), false);
  const auto got = num::lstm_forward(x, p);
  for (std::size_t t = 0; t < 2; ++t)
    for (std::size_t k = 0; k < 2; ++k) EXPECT_NEAR(got(t, k), expected[t][k], 1e-14);
}

TEST(Lstm, ReverseTimeOutputsAlignToOriginalOrder) {
  std::mt19937_64 rng(8);
  const auto p = random_lstm(2, 3, rng);
  const Matrix x = testutil::random_matrix(5, 2, rng);
  const auto expected = oracle::lstm_run(to_oracle(p), testutil::to_nested(x), true);
  const auto got = num::lstm_forward(x, p, true);
  for (std::size_t t = 0; t < 5; ++t)
    for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(got(t, k), expected[t][k], 1e-14);
  // The last original timestep is consumed first, from zero state.
  const auto single = num::lstm_forward(Matrix::row(x.row_span(4)), p);
  for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(got(4, k), single(0, k), 1e-15);
}

TEST(Lstm, InputSizeMismatchIsDimensionError) {
  EXPECT_THROW(num::lstm_forward(Matrix(3, 2), num::make_lstm(3, 4)), retain::DimensionError);
}

TEST(Lstm, InitialisationUsesForgetBiasOne) {
  num::Rng rng(1);
  const auto p = num::init_lstm(3, 4, rng);
  for (std::size_t k = 0; k < 16; ++k) EXPECT_EQ(p.b[k], (k >= 4 && k < 8) ? 1.0 : 0.0);
  const double limit = std::sqrt(6.0 / (3 + 16));
  for (double v : p.w.values()) EXPECT_LE(std::abs(v), limit);
}

TEST(Lstm, BatchedSequenceGradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(9);
  const auto p = random_lstm(2, 3, rng);
  std::vector<Matrix> xs;
  for (int t = 0; t < 4; ++t) xs.push_back(testutil::random_matrix(2, 2, rng));
  const Matrix weights = testutil::random_matrix(2, 3, rng);
  auto objective = [&](const num::LstmParams& params, num::LstmParams* grad) {
    num::Tape tape;
    const auto bound = num::bind(tape, params);
    std::vector<num::Var> in;
    for (const auto& x : xs) in.push_back(tape.constant(x));
    auto hs = num::lstm_sequence(in, bound, true);
    std::vector<num::Var> terms;
    for (auto& h : hs) terms.push_back(num::mul(h, tape.constant(weights)));
    const auto s = num::sum(terms);
    const auto f = num::matmul(num::matmul(tape.constant(Matrix(1, 2, 1.0)), s), tape.constant(Matrix(3, 1, 1.0)));
    if (grad) {
      tape.backward(f);
      *grad = num::gradients(tape, bound);
    }
    return f.value()[0];
  };
  num::LstmParams grad;
  objective(p, &grad);
  const auto flat = num::flatten(p);
  const auto f = [&](std::span<const double> v) {
    auto q = p;
    num::unflatten(q, v);
    return objective(q, nullptr);
  };
  EXPECT_LE(num::grad_check(f, flat, num::flatten(grad)), 1e-6);
}
