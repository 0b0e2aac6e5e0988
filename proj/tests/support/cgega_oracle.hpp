// SPDX-License-Identifier: Apache-2.0
#pragma once

// Error-grid zones and AP/BE/EP grids written as plain branching code, kept apart
// from the data-table encoding used by the library.

#include <cmath>
#include <string>

namespace oracle {

// Point zone for reference x, prediction y (mg/dL), reference rate in mg/dL/min.
inline std::string p_zone(double x, double y, double rate) {
  const double a = std::abs(rate);
  const double d = a > 2.0 ? 20.0 : (a > 1.0 ? 10.0 : 0.0);
  if ((x <= 70 && y <= 70) || (y >= 0.8 * x && y <= 1.2 * x)) return "A";
  if (x <= 70 && y >= 180 + d) return "E";
  if (x >= 180 && y <= 70) return "E";
  if (x >= 70 && x <= 290 && y >= x + 110 + d) return "C";
  if (x >= 130 && x <= 180 && y <= 1.4 * x - 182) return "C";
  if (x >= 240 && y >= 70 && y <= 180) return "D";
  if (3 * x <= 175 && y >= 70 && y <= 180 + d) return "D";
  if (3 * x >= 175 && x <= 70 && y >= 1.2 * x) return "D";
  return "B";
}

// Rate zone for reference rate x and predicted rate y (mg/dL/min).
inline std::string r_zone(double x, double y) {
  if (std::abs(y - x) <= 1.0) return "A";
  if (x >= 0 && y <= 1.2 * x && y >= 0.8 * x) return "A";
  if (x <= 0 && y <= 0.8 * x && y >= 1.2 * x) return "A";
  if (x < -1 && y > 1) return "uE";
  if (x > 1 && y < -1) return "lE";
  const bool flat_true = x >= -1 && x <= 1;
  const bool flat_pred = y >= -1 && y <= 1;
  if (flat_true && y - x > 2) return "uC";
  if (flat_true && y - x < -2) return "lC";
  if (flat_pred && x - y < -2) return "uD";
  if (flat_pred && x - y > 2) return "lD";
  return "B";
}

inline std::string region(double y_true) {
  if (y_true < 70) return "hypo";
  if (y_true > 180) return "hyper";
  return "eu";
}

inline std::string combine(const std::string& p, const std::string& r, const std::string& region) {
  const bool r_ok = r == "A" || r == "B";
  if (region == "hypo") {
    if (p != "A") return "EP";
    if (r_ok) return "AP";
    if (r == "uC" || r == "lC" || r == "lD" || r == "lE") return "BE";
    return "EP";
  }
  if (p != "A" && p != "B") return "EP";
  if (r_ok) return "AP";
  if (r == "uC" || r == "lC") return "BE";
  if (region == "eu") return (r == "uD" || r == "lD") ? "BE" : "EP";
  return r == "uD" ? "BE" : "EP";
}

}  // namespace oracle
