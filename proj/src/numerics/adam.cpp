// SPDX-License-Identifier: Apache-2.0
#include "adamd/numerics/adam.hpp"

#include <cmath>

namespace adamd::num {

void adam_step(std::span<Tensor> params, AdamState &state) {
  if (state.first_moment.size() != params.size()) {
    state.first_moment.clear();
    state.second_moment.clear();
    for (const Tensor &p : params) {
      state.first_moment.emplace_back(p.size(), 0.0);
      state.second_moment.emplace_back(p.size(), 0.0);
    }
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor &p = params[k];
    auto &m = state.first_moment[k];
    auto &v = state.second_moment[k];
    if (m.size() != p.size())
      throw ShapeError("adam_step: moment buffer does not match parameter " +
                       std::to_string(k));
    auto values = p.mutable_values();
    auto grad = p.grad();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double g = grad.empty() ? 0.0 : grad[i];
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g;
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g * g;
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      values[i] -= state.lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
  }
}

} // namespace adamd::num
