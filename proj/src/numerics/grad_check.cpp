// SPDX-License-Identifier: Apache-2.0
#include "adamd/numerics/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "adamd/numerics/tape.hpp"

namespace adamd::num {

namespace {
thread_local KinkProbe *active_probe = nullptr;

// Value and branch fingerprint of one evaluation.
std::pair<double, std::uint64_t> probe(const std::function<Tensor()> &fn) {
  KinkProbe k;
  const double v = fn().item();
  return {v, k.fingerprint()};
}
} // namespace

KinkProbe::KinkProbe() : previous_(active_probe) { active_probe = this; }
KinkProbe::~KinkProbe() { active_probe = previous_; }
KinkProbe *KinkProbe::current() { return active_probe; }

GradCheckResult grad_check(const std::function<Tensor()> &fn,
                           std::span<Tensor> inputs,
                           const GradCheckOptions &options) {
  std::vector<bool> saved_flags;
  for (Tensor &x : inputs) {
    saved_flags.push_back(x.requires_grad());
    x.set_requires_grad(true);
    x.zero_grad();
  }
  {
    Tape tape;
    Tape::Scope scope(tape);
    const Tensor y = fn();
    tape.backward(y);
  }

  Tape::Pause pause;
  std::mt19937_64 rng(options.seed);
  GradCheckResult result;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    Tensor &x = inputs[k];
    std::vector<double> analytic(x.size(), 0.0);
    if (x.has_grad()) std::copy(x.grad().begin(), x.grad().end(), analytic.begin());

    std::vector<std::size_t> coords(x.size());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (options.max_coords_per_input && coords.size() > options.max_coords_per_input) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(options.max_coords_per_input);
    }
    auto values = x.mutable_values();
    for (std::size_t i : coords) {
      const double orig = values[i];
      values[i] = orig + options.eps;
      const auto [up, up_branches] = probe(fn);
      values[i] = orig - options.eps;
      const auto [down, down_branches] = probe(fn);
      values[i] = orig;
      if (options.skip_kinks && up_branches != down_branches) {
        ++result.coords_skipped;
        continue;
      }
      const double numeric = (up - down) / (2.0 * options.eps);
      const double denom =
          std::max({std::abs(analytic[i]), std::abs(numeric), options.floor});
      result.max_rel_error =
          std::max(result.max_rel_error, std::abs(analytic[i] - numeric) / denom);
      ++result.coords_checked;
    }
  }
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    inputs[k].zero_grad();
    inputs[k].set_requires_grad(saved_flags[k]);
  }
  return result;
}

} // namespace adamd::num
