// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <string>
#include <vector>

#include "retain/num/matrix.hpp"
#include "retain/num/params.hpp"
#include "retain/num/tape.hpp"

namespace retain::num {

/// Single-layer LSTM weights. Gate blocks are stacked in the fixed order
/// (input, forget, cell candidate, output):
///   w: 4h x in, u: 4h x h, b: 4h x 1.
template <class T>
struct LstmWeights {
  T w;
  T u;
  T b;

  template <class U>
  using rebind = LstmWeights<U>;

  template <class Self, class F>
  static void visit(Self& self, F&& f) {
    f("w", self.w);
    f("u", self.u);
    f("b", self.b);
  }
};

using LstmParams = LstmWeights<Matrix>;

/// Zero weights of the given sizes.
LstmParams make_lstm(std::size_t input_size, std::size_t hidden_size);
/// Glorot-uniform w and u, zero bias except forget-gate bias 1.
LstmParams init_lstm(std::size_t input_size, std::size_t hidden_size, Rng& rng);

std::size_t lstm_input_size(const LstmParams& p);
std::size_t lstm_hidden_size(const LstmParams& p);
void validate_lstm(const LstmParams& p, const std::string& name);

/// Runs the recurrence over `inputs` (one B x input_size Var per timestep) from
/// zero initial states. With `reverse_time` the sequence is consumed last to
/// first; outputs are always returned aligned to the original time order.
std::vector<Var> lstm_sequence(std::span<const Var> inputs, const LstmWeights<Var>& weights, bool reverse_time);

/// Unbatched convenience: `inputs` is T x input_size, result is T x hidden_size.
Matrix lstm_forward(const Matrix& inputs, const LstmParams& params, bool reverse_time = false);

}  // namespace retain::num
