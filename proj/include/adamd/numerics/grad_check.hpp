// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>

#include "adamd/numerics/tensor.hpp"

namespace adamd::num {

struct GradCheckOptions {
  double eps = 1e-5;
  // Denominator floor for the relative error, so coordinates whose true
  // gradient is ~0 are compared on an absolute scale.
  double floor = 1e-3;
  // 0 checks every coordinate; otherwise at most this many per input tensor,
  // drawn with `seed`.
  std::size_t max_coords_per_input = 0;
  std::uint64_t seed = 0;
  // Drop coordinates whose +eps and -eps evaluations take different relu or
  // maxpool branches; the function is not differentiable between them.
  bool skip_kinks = true;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t coords_checked = 0;
  std::size_t coords_skipped = 0;
};

/// While alive, piecewise ops (relu sign, maxpool argmax) on this thread fold
/// their branch choices into a fingerprint.
class KinkProbe {
public:
  KinkProbe();
  ~KinkProbe();
  KinkProbe(const KinkProbe &) = delete;
  KinkProbe &operator=(const KinkProbe &) = delete;

  static KinkProbe *current();
  void note(std::uint64_t branch) { hash_ = (hash_ ^ branch) * 0x100000001b3ULL; }
  std::uint64_t fingerprint() const { return hash_; }

private:
  std::uint64_t hash_ = 0xcbf29ce484222325ULL;
  KinkProbe *previous_;
};

/// Compares tape gradients of a scalar-valued `fn` with central differences
/// by perturbing the values of `inputs` in place (restored afterwards).
/// Relative error per coordinate is |g - fd| / max(|g|, |fd|, floor).
GradCheckResult grad_check(const std::function<Tensor()> &fn,
                           std::span<Tensor> inputs,
                           const GradCheckOptions &options = {});

} // namespace adamd::num
