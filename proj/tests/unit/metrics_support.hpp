// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <random>
#include <vector>

#include "adamd/metrics/metrics.hpp"

namespace adamd::testing {

// Onsets on a 0.05 s grid over [0, 3] so exact-collar distances and ties occur.
inline std::vector<metrics::Event> random_events(std::mt19937_64 &rng, std::size_t max_count,
                                                 std::size_t classes) {
  std::uniform_int_distribution<std::size_t> count(0, max_count), cls(0, classes - 1);
  std::uniform_int_distribution<int> slot(0, 60);
  std::vector<metrics::Event> ev(count(rng));
  for (auto &e : ev) {
    e.class_index = cls(rng);
    e.onset = slot(rng) * 0.05;
    e.offset = e.onset + 0.3;
  }
  return ev;
}

} // namespace adamd::testing
