// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <span>
#include <vector>

namespace retain::num {

using ScalarFn = std::function<double(std::span<const double>)>;

/// Central differences (f(p + eps e_k) - f(p - eps e_k)) / (2 eps) for every coordinate.
/// Throws EvaluationError if f returns a non-finite value.
std::vector<double> numeric_gradient(const ScalarFn& f, std::span<const double> params, double eps);

/// max_k |analytic_k - numeric_k| / max(1e-8, |analytic_k| + |numeric_k|).
double relative_error(std::span<const double> analytic, std::span<const double> numeric);

/// Compares `analytic` against central differences of `f` at `params`; returns the worst relative error.
double grad_check(const ScalarFn& f, std::span<const double> params, std::span<const double> analytic,
                  double eps = 1e-5);

}  // namespace retain::num
