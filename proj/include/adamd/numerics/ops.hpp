// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "adamd/numerics/tensor.hpp"

namespace adamd::num {

// Differentiable ops. Every op records itself on the active tape when one of
// its operands requires a gradient; otherwise it is a plain forward pass.

enum class Padding { same, valid };

Tensor add(const Tensor &a, const Tensor &b);
Tensor scale(const Tensor &x, double factor);
Tensor relu(const Tensor &x);
Tensor sigmoid(const Tensor &x);
Tensor sum(const Tensor &x);
Tensor reshape(const Tensor &x, Shape shape);

/// Weighted sum of same-shaped tensors; the weights are constants.
Tensor weighted_sum(std::span<const Tensor> terms, std::span<const double> weights);

/// input [C_in,H,W], kernel [C_out,C_in,kh,kw], bias [C_out] or empty.
/// Stride 1. kh and kw must be odd.
Tensor conv2d(const Tensor &input, const Tensor &kernel, const Tensor &bias,
              Padding padding = Padding::same);
Tensor conv2d(const Tensor &input, const Tensor &kernel,
              Padding padding = Padding::same);

struct PoolResult {
  Tensor output;
  std::vector<std::size_t> argmax; // flat input index per output element
};

/// 2x2 window, stride 2. Ties resolve to the lowest flat index.
PoolResult maxpool2d(const Tensor &input);

/// [C,H,W] -> [C,2H,2W], each element copied into a 2x2 block.
Tensor upsample_nearest2d(const Tensor &input);

/// Align-corners linear interpolation along axis 0 of a [T] or [T,C] tensor:
/// output frame j samples the source at j*(T-1)/(T*factor-1).
Tensor upsample_linear_time(const Tensor &input, std::size_t factor);

/// Affine map along the last axis: input [..,D_in] * weight [D_in,D_out] + bias.
Tensor dense(const Tensor &input, const Tensor &weight, const Tensor &bias);

/// Concatenate two [T,A] and [T,B] tensors into [T,A+B].
Tensor concat_features(const Tensor &a, const Tensor &b);

/// Gated recurrent unit over a [T,D] sequence, hidden state starting at zero.
/// Gate columns are laid out [update | reset | candidate]:
///   z = sig(x Wz + h Uz + bz),  r = sig(x Wr + h Ur + br)
///   n = tanh(x Wn + (r*h) Un + bn),  h' = (1-z)*n + z*h
/// input_weight [D,3H], recurrent_weight [H,3H], bias [3H]. With reverse the
/// sequence is consumed from the last frame, and output row t still holds the
/// state for frame t. Returns [T,H].
Tensor gru(const Tensor &input, const Tensor &input_weight,
           const Tensor &recurrent_weight, const Tensor &bias, bool reverse);

inline constexpr double kBceClamp = 1e-7;

/// Weighted binary cross entropy, sum_i w_i * l_i / sum_i w_i, with
/// predictions clamped to [1e-7, 1-1e-7]. Zero total weight yields 0.
/// Rejects NaN predictions. Differentiable in pred only.
Tensor bce(const Tensor &pred, const Tensor &target, const Tensor &weight);
Tensor bce(const Tensor &pred, const Tensor &target);

} // namespace adamd::num
