// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "adamd/numerics/tensor.hpp"

namespace adamd::testing {

inline num::Tensor random_tensor(num::Shape shape, std::mt19937_64 &rng,
                                 double lo = -1.0, double hi = 1.0,
                                 bool requires_grad = true) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> v(num::numel(shape));
  for (double &x : v) x = dist(rng);
  return num::Tensor::from(std::move(shape), std::move(v), requires_grad);
}

// Fixed random projection so vector-valued ops can be checked via a scalar.
inline num::Tensor probe_weights(const num::Shape &shape, std::uint64_t seed) {
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  return random_tensor(shape, rng, -1.0, 1.0, false);
}

} // namespace adamd::testing
