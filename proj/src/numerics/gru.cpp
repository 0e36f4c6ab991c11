// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <string>

#include "adamd/numerics/eigen_maps.hpp"
#include "adamd/numerics/ops.hpp"
#include "adamd/numerics/tape.hpp"

namespace adamd::num {


Tensor gru(const Tensor &input, const Tensor &input_weight,
           const Tensor &recurrent_weight, const Tensor &bias, bool reverse) {
  if (input.rank() != 2)
    throw ShapeError("gru: input must be [T,D], got " + to_string(input.shape()));
  if (recurrent_weight.rank() != 2 ||
      recurrent_weight.dim(1) != 3 * recurrent_weight.dim(0))
    throw ShapeError("gru: recurrent weight must be [H,3H], got " +
                     to_string(recurrent_weight.shape()));
  const std::size_t T = input.dim(0), D = input.dim(1);
  const std::size_t H = recurrent_weight.dim(0);
  if (input_weight.rank() != 2 || input_weight.dim(0) != D ||
      input_weight.dim(1) != 3 * H)
    throw ShapeError("gru: input weight must be [" + std::to_string(D) + "," +
                     std::to_string(3 * H) + "], got " +
                     to_string(input_weight.shape()));
  if (bias.rank() != 1 || bias.dim(0) != 3 * H)
    throw ShapeError("gru: bias must be [" + std::to_string(3 * H) + "], got " +
                     to_string(bias.shape()));

  const auto X = cmap(input.values(), T, D);
  const auto Wx = cmap(input_weight.values(), D, 3 * H);
  const auto Wh = cmap(recurrent_weight.values(), H, 3 * H);
  const auto b = cvec(bias.values());

  const Eigen::Index h = static_cast<Eigen::Index>(H);
  RowMatrix xw = X * Wx;
  xw.rowwise() += b.transpose();

  // Saved per step, indexed by frame: previous state, gates, reset*state.
  RowMatrix h_prev(T, H), z(T, H), r(T, H), n(T, H), rh(T, H);
  Tensor out = Tensor::blank({T, H});
  auto O = map(out.mutable_values(), T, H);
  Eigen::RowVectorXd state = Eigen::RowVectorXd::Zero(h);
  Eigen::RowVectorXd zr(2 * h), cand(h);
  for (std::size_t s = 0; s < T; ++s) {
    const std::size_t t = reverse ? T - 1 - s : s;
    h_prev.row(t) = state;
    zr = xw.row(t).head(2 * h);
    zr.noalias() += state * Wh.leftCols(2 * h);
    zr = (1.0 + (-zr.array()).exp()).inverse();
    z.row(t) = zr.head(h);
    r.row(t) = zr.tail(h);
    rh.row(t) = r.row(t).cwiseProduct(state);
    cand = xw.row(t).tail(h);
    cand.noalias() += rh.row(t) * Wh.rightCols(h);
    // tanh(x) = 2 sigmoid(2x) - 1 keeps the whole step on vectorized exp.
    n.row(t) = 2.0 * (1.0 + (-2.0 * cand.array()).exp()).inverse() - 1.0;
    state = n.row(t) + z.row(t).cwiseProduct(state - n.row(t));
    O.row(t) = state;
  }

  Tape *tape = Tape::active();
  const bool track = input.requires_grad() || input_weight.requires_grad() ||
                     recurrent_weight.requires_grad() || bias.requires_grad();
  if (tape && track) {
    out.set_requires_grad(true);
    tape->record("gru", [xn = input.node(), wxn = input_weight.node(),
                         whn = recurrent_weight.node(), bn = bias.node(),
                         on = out.node(), h_prev = std::move(h_prev),
                         z = std::move(z), r = std::move(r), n = std::move(n),
                         rh = std::move(rh), T, D, H, reverse] {
      if (on->grad.empty()) return;
      const Eigen::Index h = static_cast<Eigen::Index>(H);
      const auto G = cmap(on->grad, T, H);
      const auto Wh = cmap(whn->data, H, 3 * H);
      RowMatrix da(T, 3 * H); // pre-activation gradients [z | r | n]
      Eigen::RowVectorXd carry = Eigen::RowVectorXd::Zero(h);
      Eigen::RowVectorXd dh(h), dprev(h), drh(h);
      for (std::size_t s = 0; s < T; ++s) {
        const std::size_t t = reverse ? s : T - 1 - s;
        dh = G.row(t) + carry;
        dprev = dh.cwiseProduct(z.row(t));
        for (Eigen::Index i = 0; i < h; ++i) {
          const double dn = dh(i) * (1.0 - z(t, i));
          const double dz = dh(i) * (h_prev(t, i) - n(t, i));
          da(t, 2 * h + i) = dn * (1.0 - n(t, i) * n(t, i));
          da(t, i) = dz * z(t, i) * (1.0 - z(t, i));
        }
        drh.noalias() = da.row(t).tail(h) * Wh.rightCols(h).transpose();
        for (Eigen::Index i = 0; i < h; ++i) {
          const double dr = drh(i) * h_prev(t, i);
          da(t, h + i) = dr * r(t, i) * (1.0 - r(t, i));
          dprev(i) += drh(i) * r(t, i);
        }
        dprev.noalias() += da.row(t).head(2 * h) * Wh.leftCols(2 * h).transpose();
        carry.swap(dprev);
      }
      if (whn->requires_grad) {
        auto gWh = map(whn->grad_buffer(), H, 3 * H);
        gWh.leftCols(2 * h).noalias() += h_prev.transpose() * da.leftCols(2 * h);
        gWh.rightCols(h).noalias() += rh.transpose() * da.rightCols(h);
      }
      if (wxn->requires_grad)
        map(wxn->grad_buffer(), D, 3 * H).noalias() +=
            cmap(xn->data, T, D).transpose() * da;
      if (bn->requires_grad)
        vec(bn->grad_buffer()) += da.colwise().sum().transpose();
      if (xn->requires_grad)
        map(xn->grad_buffer(), T, D).noalias() +=
            da * cmap(wxn->data, D, 3 * H).transpose();
    });
  }
  return out;
}

} // namespace adamd::num
