// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "adamd/numerics/tensor.hpp"

namespace adamd::num {

struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t step = 0;
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
};

/// One bias-corrected Adam update using each parameter's accumulated
/// gradient. Parameters without a gradient buffer are treated as having a
/// zero gradient. Moment buffers are allocated on the first call.
void adam_step(std::span<Tensor> params, AdamState &state);

} // namespace adamd::num
