// SPDX-License-Identifier: Apache-2.0
#pragma once

// Generic helpers over parameter structs.
//
// A parameter struct is a template `W<T>` whose members are T (or nested
// parameter structs). It provides
//   template <class U> using rebind = W<U>;
//   template <class Self, class F> static void visit(Self& self, F&& f);
// where `visit` calls f(name, member) for every leaf, always in the same order.

#include <random>
#include <span>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "retain/errors.hpp"
#include "retain/num/matrix.hpp"
#include "retain/num/tape.hpp"

namespace retain::num {

using Rng = std::mt19937_64;

template <class E>
struct NamedRef {
  std::string name;
  E* ref;
};

template <class E, class W>
std::vector<NamedRef<E>> collect(W& w) {
  std::vector<NamedRef<E>> out;
  std::remove_const_t<W>::visit(w, [&](const std::string& name, E& m) { out.push_back({name, &m}); });
  return out;
}

/// Visits a nested parameter struct with dotted names ("rnn_alpha.w").
template <class Nested, class F>
void visit_nested(const std::string& prefix, Nested& nested, F&& f) {
  std::remove_const_t<Nested>::visit(nested, [&](const std::string& name, auto& m) { f(prefix + "." + name, m); });
}

/// Records every parameter as a differentiable leaf.
template <class W>
auto bind(Tape& tape, const W& params) {
  typename W::template rebind<Var> bound;
  auto src = collect<const Matrix>(params);
  auto dst = collect<Var>(bound);
  for (std::size_t i = 0; i < src.size(); ++i) *dst[i].ref = tape.leaf(*src[i].ref);
  return bound;
}

/// Records every parameter as a constant (inference only).
template <class W>
auto bind_constant(Tape& tape, const W& params) {
  typename W::template rebind<Var> bound;
  auto src = collect<const Matrix>(params);
  auto dst = collect<Var>(bound);
  for (std::size_t i = 0; i < src.size(); ++i) *dst[i].ref = tape.constant(*src[i].ref);
  return bound;
}

template <class WV>
auto gradients(const Tape& tape, const WV& bound) {
  typename WV::template rebind<Matrix> out;
  auto src = collect<const Var>(bound);
  auto dst = collect<Matrix>(out);
  for (std::size_t i = 0; i < src.size(); ++i) *dst[i].ref = tape.grad(*src[i].ref);
  return out;
}

template <class W>
W zeros_like(const W& params) {
  W out = params;
  for (auto& r : collect<Matrix>(out)) *r.ref = Matrix(r.ref->rows(), r.ref->cols());
  return out;
}

template <class W>
std::size_t parameter_count(const W& params) {
  std::size_t n = 0;
  for (const auto& r : collect<const Matrix>(params)) n += r.ref->size();
  return n;
}

template <class W>
std::vector<double> flatten(const W& params) {
  std::vector<double> out;
  for (const auto& r : collect<const Matrix>(params)) out.insert(out.end(), r.ref->values().begin(), r.ref->values().end());
  return out;
}

template <class W>
void unflatten(W& params, std::span<const double> flat) {
  std::size_t offset = 0;
  for (auto& r : collect<Matrix>(params)) {
    auto dst = r.ref->values();
    if (offset + dst.size() > flat.size()) throw DimensionError("unflatten: flat vector too short");
    std::copy(flat.begin() + static_cast<std::ptrdiff_t>(offset),
              flat.begin() + static_cast<std::ptrdiff_t>(offset + dst.size()), dst.begin());
    offset += dst.size();
  }
  if (offset != flat.size()) throw DimensionError("unflatten: flat vector too long");
}

/// Parameters with identical names and shapes, in visit order.
template <class W>
bool same_layout(const W& a, const W& b) {
  auto ra = collect<const Matrix>(a);
  auto rb = collect<const Matrix>(b);
  if (ra.size() != rb.size()) return false;
  for (std::size_t i = 0; i < ra.size(); ++i)
    if (!ra[i].ref->same_shape(*rb[i].ref)) return false;
  return true;
}

/// Glorot/Xavier uniform: U(-l, l) with l = sqrt(6 / (fan_in + fan_out)).
void glorot_uniform(Matrix& m, std::size_t fan_in, std::size_t fan_out, Rng& rng);

}  // namespace retain::num
