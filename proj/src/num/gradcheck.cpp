// SPDX-License-Identifier: Apache-2.0
#include "retain/num/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "retain/errors.hpp"

namespace retain::num {

std::vector<double> numeric_gradient(const ScalarFn& f, std::span<const double> params, double eps) {
  if (!(eps > 0.0)) throw ArgumentError("numeric_gradient: eps must be positive");
  std::vector<double> probe(params.begin(), params.end());
  std::vector<double> out(params.size());
  auto eval = [&](std::size_t k) {
    const double v = f(probe);
    if (!std::isfinite(v)) throw EvaluationError("numeric_gradient: non-finite value perturbing coordinate " + std::to_string(k));
    return v;
  };
  for (std::size_t k = 0; k < probe.size(); ++k) {
    const double original = probe[k];
    probe[k] = original + eps;
    const double up = eval(k);
    probe[k] = original - eps;
    const double down = eval(k);
    probe[k] = original;
    out[k] = (up - down) / (2.0 * eps);
  }
  return out;
}

double relative_error(std::span<const double> analytic, std::span<const double> numeric) {
  if (analytic.size() != numeric.size()) throw DimensionError("relative_error: length mismatch");
  double worst = 0.0;
  for (std::size_t k = 0; k < analytic.size(); ++k) {
    const double denom = std::max(1e-8, std::abs(analytic[k]) + std::abs(numeric[k]));
    worst = std::max(worst, std::abs(analytic[k] - numeric[k]) / denom);
  }
  return worst;
}

double grad_check(const ScalarFn& f, std::span<const double> params, std::span<const double> analytic, double eps) {
  if (analytic.size() != params.size()) throw DimensionError("grad_check: gradient length does not match parameters");
  const double base = f(params);
  if (!std::isfinite(base)) throw EvaluationError("grad_check: non-finite value at the base point");
  const auto numeric = numeric_gradient(f, params, eps);
  return relative_error(analytic, numeric);
}

}  // namespace retain::num
