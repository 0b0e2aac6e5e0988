// SPDX-License-Identifier: Apache-2.0
#include "retain/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>

#include "retain/errors.hpp"

namespace retain {

using num::Matrix;

WindowBatch make_batch(std::span<const Matrix* const> windows) {
  if (windows.empty()) throw ArgumentError("make_batch: no windows");
  const std::size_t steps = windows.front()->rows();
  const std::size_t cols = windows.front()->cols();
  const std::size_t batch = windows.size();
  WindowBatch out{Matrix(steps * batch, cols), batch, steps};
  for (std::size_t b = 0; b < batch; ++b) {
    const Matrix& w = *windows[b];
    if (w.rows() != steps || w.cols() != cols) {
      throw DimensionError("make_batch: window " + w.shape_string() + " differs from " +
                           windows.front()->shape_string());
    }
    for (std::size_t t = 0; t < steps; ++t) {
      const auto src = w.row_span(t);
      std::copy(src.begin(), src.end(), out.data.row_span(t * batch + b).begin());
    }
  }
  return out;
}

WindowBatch make_batch(std::span<const Matrix> windows) {
  std::vector<const Matrix*> ptrs;
  ptrs.reserve(windows.size());
  for (const Matrix& w : windows) ptrs.push_back(&w);
  return make_batch(ptrs);
}

std::vector<num::Var> timestep_inputs(num::Tape& tape, const WindowBatch& batch) {
  std::vector<num::Var> xs;
  xs.reserve(batch.steps);
  const std::size_t width = batch.batch * batch.data.cols();
  for (std::size_t t = 0; t < batch.steps; ++t) {
    const auto first = batch.data.values().begin() + static_cast<std::ptrdiff_t>(t * width);
    xs.push_back(tape.constant(
        Matrix(batch.batch, batch.data.cols(), std::vector<double>(first, first + static_cast<std::ptrdiff_t>(width)))));
  }
  return xs;
}

std::vector<double> predict(const Model& model, std::span<const Matrix* const> windows, std::size_t batch_size) {
  if (batch_size == 0) throw ArgumentError("predict: batch_size must be positive");
  std::vector<double> out;
  out.reserve(windows.size());
  for (std::size_t start = 0; start < windows.size(); start += batch_size) {
    const std::size_t n = std::min(batch_size, windows.size() - start);
    const WindowBatch batch = make_batch(windows.subspan(start, n));
    num::Tape tape;
    const GraphOutputs g = model.graph(tape, batch, GraphOptions{});
    const auto y = g.y_hat.value().values();
    out.insert(out.end(), y.begin(), y.end());
  }
  return out;
}

std::vector<double> predict(const Model& model, std::span<const Matrix> windows, std::size_t batch_size) {
  std::vector<const Matrix*> ptrs;
  ptrs.reserve(windows.size());
  for (const Matrix& w : windows) ptrs.push_back(&w);
  return predict(model, ptrs, batch_size);
}

std::vector<double> flatten_parameters(const Model& model) {
  std::vector<double> out;
  for (const auto& p : model.parameters()) out.insert(out.end(), p.ref->values().begin(), p.ref->values().end());
  return out;
}

void assign_parameters(Model& model, std::span<const double> flat) {
  std::size_t offset = 0;
  for (auto& p : model.parameters()) {
    auto dst = p.ref->values();
    if (offset + dst.size() > flat.size()) throw DimensionError("assign_parameters: flat vector too short");
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(offset), dst.size(), dst.begin());
    offset += dst.size();
  }
  if (offset != flat.size()) throw DimensionError("assign_parameters: flat vector too long");
}

nlohmann::json matrix_to_json(const Matrix& m) {
  nlohmann::json data = nlohmann::json::array();
  char buf[32];
  for (double v : m.values()) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    data.push_back(buf);
  }
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

Matrix matrix_from_json(const nlohmann::json& j, const std::string& name) {
  if (!j.is_object() || !j.contains("rows") || !j.contains("cols") || !j.contains("data")) {
    throw ArgumentError("parameter '" + name + "': expected {rows, cols, data}");
  }
  const auto rows = j.at("rows").get<std::size_t>();
  const auto cols = j.at("cols").get<std::size_t>();
  const auto& data = j.at("data");
  if (!data.is_array()) throw ArgumentError("parameter '" + name + "': data must be an array");
  std::vector<double> values;
  values.reserve(data.size());
  for (const auto& v : data) {
    if (v.is_number()) {
      values.push_back(v.get<double>());
    } else if (v.is_string()) {
      const std::string s = v.get<std::string>();
      char* end = nullptr;
      const double d = std::strtod(s.c_str(), &end);
      if (end == s.c_str() || *end != '\0') throw ArgumentError("parameter '" + name + "': bad number '" + s + "'");
      values.push_back(d);
    } else {
      throw ArgumentError("parameter '" + name + "': data entries must be numbers or decimal strings");
    }
  }
  if (values.size() != rows * cols) {
    throw DimensionError("parameter '" + name + "': " + std::to_string(values.size()) + " values for (" +
                         std::to_string(rows) + "x" + std::to_string(cols) + ")");
  }
  try {
    return Matrix::checked(rows, cols, std::move(values));
  } catch (const ArgumentError&) {
    throw ArgumentError("parameter '" + name + "': non-finite value");
  }
}

nlohmann::json model_to_json(const Model& model) {
  nlohmann::json params = nlohmann::json::object();
  for (const auto& p : model.parameters()) params[p.name] = matrix_to_json(*p.ref);
  return {{"format", model.format()}, {"config", model.config_json()}, {"params", std::move(params)}};
}

void load_parameters(Model& model, const nlohmann::json& doc) {
  if (doc.value("format", std::string{}) != model.format()) {
    throw ArgumentError("load_parameters: format '" + doc.value("format", std::string{}) + "' but expected '" +
                        model.format() + "'");
  }
  const auto& params = doc.at("params");
  std::size_t seen = 0;
  for (auto& p : model.parameters()) {
    if (!params.contains(p.name)) throw ArgumentError("load_parameters: missing parameter '" + p.name + "'");
    Matrix m = matrix_from_json(params.at(p.name), p.name);
    if (!m.same_shape(*p.ref)) {
      throw DimensionError("load_parameters: '" + p.name + "' is " + m.shape_string() + ", config implies " +
                           p.ref->shape_string());
    }
    *p.ref = std::move(m);
    ++seen;
  }
  if (seen != params.size()) throw ArgumentError("load_parameters: document has unknown parameters");
}

}  // namespace retain
