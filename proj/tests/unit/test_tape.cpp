// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <functional>
#include <random>

#include "retain/errors.hpp"
#include "retain/num/gradcheck.hpp"
#include "retain/num/tape.hpp"
#include "support/convert.hpp"

namespace num = retain::num;
using num::Matrix;
using num::Tape;
using num::Var;

namespace {

Var total(Var m) {
  Tape& t = m.tape();
  const Var left = t.constant(Matrix(1, m.rows(), 1.0));
  const Var right = t.constant(Matrix(m.cols(), 1, 1.0));
  return num::matmul(num::matmul(left, m), right);
}

using Builder = std::function<Var(Tape&, const std::vector<Var>&)>;

// Scalar objective: sum(op(inputs) .* weights) with a fixed random weighting.
double worst_primitive_error(const std::vector<Matrix>& inputs, const Builder& build, std::uint64_t seed) {
  Matrix weights;
  {
    Tape probe;
    std::vector<Var> vs;
    for (const auto& m : inputs) vs.push_back(probe.leaf(m));
    const Var out = build(probe, vs);
    std::mt19937_64 rng(seed);
    weights = testutil::random_matrix(out.rows(), out.cols(), rng);
  }
  auto evaluate = [&](const std::vector<Matrix>& ms, std::vector<Matrix>* grads) {
    Tape t;
    std::vector<Var> vs;
    for (const auto& m : ms) vs.push_back(t.leaf(m));
    const Var f = total(num::mul(build(t, vs), t.constant(weights)));
    if (grads) {
      t.backward(f);
      for (const Var& v : vs) grads->push_back(t.grad(v));
    }
    return f.value()[0];
  };
  std::vector<Matrix> grads;
  evaluate(inputs, &grads);
  std::vector<double> flat, analytic;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    flat.insert(flat.end(), inputs[k].values().begin(), inputs[k].values().end());
    analytic.insert(analytic.end(), grads[k].values().begin(), grads[k].values().end());
  }
  auto f = [&](std::span<const double> p) {
    std::vector<Matrix> ms = inputs;
    std::size_t off = 0;
    for (auto& m : ms)
      for (double& v : m.values()) v = p[off++];
    return evaluate(ms, nullptr);
  };
  return num::grad_check(f, flat, analytic, 1e-5);
}

class PrimitiveGradients : public ::testing::Test {
 protected:
  std::mt19937_64 rng{11};
  Matrix rand(std::size_t r, std::size_t c, double s = 1.0) { return testutil::random_matrix(r, c, rng, s); }
};

}  // namespace

TEST_F(PrimitiveGradients, LinearAlgebra) {
  EXPECT_LE(worst_primitive_error({rand(3, 4), rand(4, 2)}, [](Tape&, auto& v) { return num::matmul(v[0], v[1]); }, 1), 1e-6);
  EXPECT_LE(worst_primitive_error({rand(3, 4), rand(5, 4)}, [](Tape&, auto& v) { return num::matmul_nt(v[0], v[1]); }, 2), 1e-6);
  EXPECT_LE(worst_primitive_error({rand(3, 4), rand(3, 4)}, [](Tape&, auto& v) { return num::add(v[0], v[1]); }, 3), 1e-6);
  EXPECT_LE(worst_primitive_error({rand(3, 4), rand(3, 4)}, [](Tape&, auto& v) { return num::sub(v[0], v[1]); }, 4), 1e-6);
  EXPECT_LE(worst_primitive_error({rand(3, 4), rand(4, 1)}, [](Tape&, auto& v) { return num::add_bias(v[0], v[1]); }, 5), 1e-6);
  EXPECT_LE(worst_primitive_error({rand(3, 4), rand(3, 4)}, [](Tape&, auto& v) { return num::mul(v[0], v[1]); }, 6), 1e-6);
  EXPECT_LE(worst_primitive_error({rand(3, 4), rand(3, 1)}, [](Tape&, auto& v) { return num::scale_rows(v[0], v[1]); }, 7), 1e-6);
  EXPECT_LE(worst_primitive_error({rand(3, 4)}, [](Tape&, auto& v) { return num::scale(v[0], -2.5); }, 8), 1e-6);
}

TEST_F(PrimitiveGradients, Nonlinearities) {
  EXPECT_LE(worst_primitive_error({rand(3, 4, 2.0)}, [](Tape&, auto& v) { return num::sigmoid(v[0]); }, 9), 1e-6);
  EXPECT_LE(worst_primitive_error({rand(3, 4, 2.0)}, [](Tape&, auto& v) { return num::tanh(v[0]); }, 10), 1e-6);
  EXPECT_LE(worst_primitive_error({rand(3, 5, 2.0)}, [](Tape&, auto& v) { return num::softmax_rows(v[0]); }, 11), 1e-6);
}

TEST_F(PrimitiveGradients, Restructuring) {
  EXPECT_LE(worst_primitive_error({rand(3, 6)}, [](Tape&, auto& v) { return num::slice_cols(v[0], 2, 3); }, 12), 1e-6);
  EXPECT_LE(worst_primitive_error({rand(6, 3)}, [](Tape&, auto& v) { return num::slice_rows(v[0], 1, 4); }, 13), 1e-6);
  EXPECT_LE(worst_primitive_error({rand(3, 2), rand(3, 4)}, [](Tape&, auto& v) { return num::concat_cols(v); }, 14), 1e-6);
  EXPECT_LE(worst_primitive_error({rand(2, 3), rand(4, 3)}, [](Tape&, auto& v) { return num::concat_rows(v); }, 15), 1e-6);
  EXPECT_LE(worst_primitive_error({rand(2, 3), rand(2, 3), rand(2, 3)}, [](Tape&, auto& v) { return num::sum(v); }, 16), 1e-6);
  EXPECT_LE(worst_primitive_error({rand(6, 2)}, [](Tape&, auto& v) { return num::reshape(v[0], 3, 4); }, 20), 1e-6);
  EXPECT_LE(worst_primitive_error({rand(3, 5)}, [](Tape&, auto& v) { return num::transpose(v[0]); }, 21), 1e-6);
  EXPECT_LE(worst_primitive_error({rand(6, 2)}, [](Tape&, auto& v) { return num::sum_row_blocks(v[0], 3); }, 22), 1e-6);
}

TEST(TapeBehaviour, SumRowBlocksAddsStackedBlocks) {
  Tape t;
  const Var a = t.constant(Matrix{{1, 2}, {3, 4}, {10, 20}, {30, 40}});
  EXPECT_EQ(num::sum_row_blocks(a, 2).value(), (Matrix{{11, 22}, {33, 44}}));
  EXPECT_THROW(num::sum_row_blocks(a, 3), retain::DimensionError);
  EXPECT_THROW(num::reshape(a, 3, 3), retain::DimensionError);
}

TEST_F(PrimitiveGradients, Losses) {
  const Matrix target = rand(5, 1);
  EXPECT_LE(worst_primitive_error({rand(5, 1)}, [&](Tape&, auto& v) { return num::mse(v[0], target); }, 17), 1e-6);
  const std::vector<int> labels{0, 2, 1, 2};
  EXPECT_LE(worst_primitive_error({rand(4, 3)},
                                  [&](Tape&, auto& v) { return num::cross_entropy(num::softmax_rows(v[0]), labels); }, 18),
            1e-6);
  EXPECT_LE(worst_primitive_error({rand(3, 3)}, [](Tape&, auto& v) { return num::sum_squares(v[0]); }, 19), 1e-6);
}

TEST(TapeBehaviour, FanOutAccumulatesAdditively) {
  Tape t;
  const Var x = t.leaf(Matrix{{3.0}});
  const Var y = num::add(num::mul(x, x), x);  // x^2 + x
  t.backward(y);
  EXPECT_DOUBLE_EQ(t.grad(x)[0], 7.0);
}

TEST(TapeBehaviour, ReverseGradientFlipsSignOnlyOnTheBackwardPass) {
  Tape t;
  const Var x = t.leaf(Matrix{{2.0}});
  const Var r = num::reverse_gradient(num::mul(x, x));
  EXPECT_DOUBLE_EQ(r.value()[0], 4.0);
  t.backward(r);
  EXPECT_DOUBLE_EQ(t.grad(x)[0], -4.0);
}

TEST(TapeBehaviour, ConstantsReceiveNoGradient) {
  Tape t;
  const Var c = t.constant(Matrix{{5.0}});
  const Var x = t.leaf(Matrix{{2.0}});
  t.backward(num::mul(c, x));
  EXPECT_DOUBLE_EQ(t.grad(x)[0], 5.0);
  EXPECT_DOUBLE_EQ(t.grad(c)[0], 0.0);
}

TEST(TapeBehaviour, ReplayIsBitIdentical) {
  auto run = [] {
    std::mt19937_64 rng(99);
    Tape t;
    const Var a = t.leaf(testutil::random_matrix(4, 3, rng));
    const Var b = t.leaf(testutil::random_matrix(3, 4, rng));
    const Var s = num::softmax_rows(num::tanh(num::matmul(a, b)));
    const std::vector<int> labels{0, 1, 2, 3};
    t.backward(num::cross_entropy(s, labels));
    return std::make_pair(t.grad(a), t.grad(b));
  };
  const auto first = run();
  const auto second = run();
  EXPECT_EQ(first.first, second.first);
  EXPECT_EQ(first.second, second.second);
}

TEST(TapeBehaviour, BackwardRequiresScalarRoot) {
  Tape t;
  const Var x = t.leaf(Matrix(2, 2, 1.0));
  EXPECT_THROW(t.backward(x), retain::DimensionError);
}

TEST(TapeBehaviour, MixingTapesIsRejected) {
  Tape a, b;
  EXPECT_THROW(num::add(a.leaf(Matrix(1, 1)), b.leaf(Matrix(1, 1))), retain::ConsistencyError);
}

TEST(TapeBehaviour, CrossEntropyRejectsLabelsOutOfRange) {
  Tape t;
  const Var p = t.constant(Matrix{{0.5, 0.5}});
  const std::vector<int> bad{2};
  EXPECT_THROW(num::cross_entropy(p, bad), retain::ArgumentError);
}

TEST(GradCheck, SquareAtThree) {
  const auto f = [](std::span<const double> p) { return p[0] * p[0]; };
  const std::vector<double> x{3.0};
  const auto numeric = num::numeric_gradient(f, x, 1e-5);
  EXPECT_NEAR(numeric[0], 6.0, 1e-8);
  const std::vector<double> analytic{6.0};
  EXPECT_LT(num::grad_check(f, x, analytic, 1e-5), 1e-9);
}

TEST(GradCheck, SoftmaxSumHasZeroGradient) {
  const auto f = [](std::span<const double> p) {
    double s = 0.0;
    for (double v : num::softmax(p)) s += v;
    return s;
  };
  const std::vector<double> x{0.3, -1.0, 2.0};
  for (double g : num::numeric_gradient(f, x, 1e-5)) EXPECT_NEAR(g, 0.0, 1e-10);
  Tape t;
  const Var v = t.leaf(Matrix::row(x));
  t.backward(total(num::softmax_rows(v)));
  const Matrix g = t.grad(v);
  for (double gi : g.values()) EXPECT_NEAR(gi, 0.0, 1e-15);
}

TEST(GradCheck, NonFiniteObjectiveIsAnEvaluationError) {
  const auto f = [](std::span<const double> p) { return std::log(p[0]); };
  const std::vector<double> x{-1.0};
  const std::vector<double> g{0.0};
  EXPECT_THROW(num::grad_check(f, x, g), retain::EvaluationError);
}
