#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "facelayers/error.hpp"

namespace facelayers {

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  long step = 0;
  std::vector<double> m;
  std::vector<double> v;

  AdamState() = default;
  explicit AdamState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}
};

// Bias-corrected Adam update of `params` in place. Entries where `frozen`
// is non-zero keep their value and moments.
inline void adam_step(AdamState& state, std::span<double> params, std::span<const double> grad,
                      double lr, std::span<const unsigned char> frozen = {}) {
  if (params.size() != grad.size() || state.m.size() != params.size() || state.v.size() != params.size())
    throw ShapeError("adam_step: parameter / gradient / moment sizes differ");
  if (!frozen.empty() && frozen.size() != params.size())
    throw ShapeError("adam_step: freeze mask size differs");
  ++state.step;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!frozen.empty() && frozen[i]) continue;
    const double g = grad[i];
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
    const double denom = std::sqrt(state.v[i] / c2) + state.epsilon;
    if (denom > 0.0) params[i] -= lr * (state.m[i] / c1) / denom;
  }
}

}  // namespace facelayers
