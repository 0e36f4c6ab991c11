// SPDX-License-Identifier: Apache-2.0
#include "adamd/numerics/ops.hpp"

#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <stdexcept>
#include <string>

#include "adamd/numerics/eigen_maps.hpp"
#include "adamd/numerics/grad_check.hpp"
#include "adamd/numerics/tape.hpp"

namespace adamd::num {

namespace {

Tape *tape_for(std::initializer_list<const Tensor *> operands) {
  Tape *tape = Tape::active();
  if (!tape) return nullptr;
  for (const Tensor *t : operands)
    if (t->requires_grad()) return tape;
  return nullptr;
}

void require(bool ok, const std::string &what) {
  if (!ok) throw ShapeError(what);
}

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

} // namespace

Tensor add(const Tensor &a, const Tensor &b) {
  require(a.shape() == b.shape(), "add: shape mismatch " + to_string(a.shape()) +
                                      " vs " + to_string(b.shape()));
  Tensor out = Tensor::blank(a.shape());
  auto o = out.mutable_values();
  auto av = a.values(), bv = b.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = av[i] + bv[i];
  if (Tape *tape = tape_for({&a, &b})) {
    out.set_requires_grad(true);
    tape->record("add", [an = a.node(), bn = b.node(), on = out.node()] {
      if (on->grad.empty()) return;
      const double *go = on->grad.data();
      for (auto *n : {an.get(), bn.get()})
        if (n->requires_grad) n->accumulate_grad([go](std::size_t i) { return go[i]; });
    });
  }
  return out;
}

Tensor scale(const Tensor &x, double factor) {
  Tensor out = Tensor::blank(x.shape());
  auto o = out.mutable_values();
  auto xv = x.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = xv[i] * factor;
  if (Tape *tape = tape_for({&x})) {
    out.set_requires_grad(true);
    tape->record("scale", [xn = x.node(), on = out.node(), factor] {
      if (on->grad.empty()) return;
      auto g = xn->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += on->grad[i] * factor;
    });
  }
  return out;
}

Tensor relu(const Tensor &x) {
  Tensor out = Tensor::blank(x.shape());
  auto o = out.mutable_values();
  auto xv = x.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = xv[i] > 0 ? xv[i] : 0.0;
  if (KinkProbe *k = KinkProbe::current())
    for (std::size_t i = 0; i < o.size(); ++i) k->note(xv[i] > 0);
  if (Tape *tape = tape_for({&x})) {
    out.set_requires_grad(true);
    tape->record("relu", [xn = x.node(), on = out.node()] {
      if (on->grad.empty()) return;
      const double *go = on->grad.data(), *x = xn->data.data();
      xn->accumulate_grad([go, x](std::size_t i) { return x[i] > 0 ? go[i] : 0.0; });
    });
  }
  return out;
}

Tensor sigmoid(const Tensor &x) {
  Tensor out = Tensor::blank(x.shape());
  auto o = out.mutable_values();
  auto xv = x.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = stable_sigmoid(xv[i]);
  if (Tape *tape = tape_for({&x})) {
    out.set_requires_grad(true);
    tape->record("sigmoid", [xn = x.node(), on = out.node()] {
      if (on->grad.empty()) return;
      auto g = xn->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) {
        const double s = on->data[i];
        g[i] += on->grad[i] * s * (1.0 - s);
      }
    });
  }
  return out;
}

Tensor sum(const Tensor &x) {
  double total = 0.0;
  for (double v : x.values()) total += v;
  Tensor out = Tensor::scalar(total);
  if (Tape *tape = tape_for({&x})) {
    out.set_requires_grad(true);
    tape->record("sum", [xn = x.node(), on = out.node()] {
      if (on->grad.empty()) return;
      auto g = xn->grad_buffer();
      for (double &v : g) v += on->grad[0];
    });
  }
  return out;
}

Tensor reshape(const Tensor &x, Shape shape) {
  require(numel(shape) == x.size(), "reshape: cannot view " +
                                        to_string(x.shape()) + " as " +
                                        to_string(shape));
  Tensor out = Tensor::from(std::move(shape),
                            std::vector<double>(x.values().begin(),
                                                x.values().end()));
  if (Tape *tape = tape_for({&x})) {
    out.set_requires_grad(true);
    tape->record("reshape", [xn = x.node(), on = out.node()] {
      if (on->grad.empty()) return;
      auto g = xn->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += on->grad[i];
    });
  }
  return out;
}

Tensor weighted_sum(std::span<const Tensor> terms,
                    std::span<const double> weights) {
  require(!terms.empty() && terms.size() == weights.size(),
          "weighted_sum: need one weight per term");
  Tensor out = Tensor::zeros(terms[0].shape());
  auto o = out.mutable_values();
  bool track = false;
  for (std::size_t k = 0; k < terms.size(); ++k) {
    require(terms[k].shape() == terms[0].shape(),
            "weighted_sum: shape mismatch at term " + std::to_string(k));
    auto v = terms[k].values();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] += weights[k] * v[i];
    track = track || terms[k].requires_grad();
  }
  Tape *tape = Tape::active();
  if (tape && track) {
    out.set_requires_grad(true);
    std::vector<std::shared_ptr<detail::Node>> nodes;
    for (const auto &t : terms) nodes.push_back(t.node());
    tape->record("weighted_sum",
                 [nodes = std::move(nodes),
                  w = std::vector<double>(weights.begin(), weights.end()),
                  on = out.node()] {
                   if (on->grad.empty()) return;
                   for (std::size_t k = 0; k < nodes.size(); ++k) {
                     if (!nodes[k]->requires_grad) continue;
                     auto g = nodes[k]->grad_buffer();
                     for (std::size_t i = 0; i < g.size(); ++i)
                       g[i] += w[k] * on->grad[i];
                   }
                 });
  }
  return out;
}

PoolResult maxpool2d(const Tensor &input) {
  require(input.rank() == 3, "maxpool2d: expected [C,H,W], got " +
                                 to_string(input.shape()));
  const std::size_t C = input.dim(0), H = input.dim(1), W = input.dim(2);
  if (H % 2 || W % 2)
    throw ShapeError("maxpool2d: H and W must be even, got " +
                     to_string(input.shape()));
  const std::size_t Ho = H / 2, Wo = W / 2;
  PoolResult result{Tensor::blank({C, Ho, Wo}), {}};
  result.argmax.resize(C * Ho * Wo);
  auto x = input.values();
  auto o = result.output.mutable_values();
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t y = 0; y < Ho; ++y)
      for (std::size_t xo = 0; xo < Wo; ++xo) {
        const std::size_t base = (c * H + 2 * y) * W + 2 * xo;
        // Scan in flat-index order; strict > keeps the lowest index on ties.
        const std::size_t cand[4] = {base, base + 1, base + W, base + W + 1};
        std::size_t best = cand[0];
        for (std::size_t k = 1; k < 4; ++k)
          if (x[cand[k]] > x[best]) best = cand[k];
        const std::size_t oi = (c * Ho + y) * Wo + xo;
        o[oi] = x[best];
        result.argmax[oi] = best;
      }
  if (KinkProbe *k = KinkProbe::current())
    for (std::size_t i : result.argmax) k->note(i);
  if (Tape *tape = tape_for({&input})) {
    result.output.set_requires_grad(true);
    tape->record("maxpool2d", [xn = input.node(), on = result.output.node(),
                               idx = result.argmax] {
      if (on->grad.empty()) return;
      auto g = xn->grad_buffer();
      for (std::size_t i = 0; i < idx.size(); ++i) g[idx[i]] += on->grad[i];
    });
  }
  return result;
}

Tensor upsample_nearest2d(const Tensor &input) {
  require(input.rank() == 3, "upsample_nearest2d: expected [C,H,W], got " +
                                 to_string(input.shape()));
  const std::size_t C = input.dim(0), H = input.dim(1), W = input.dim(2);
  Tensor out = Tensor::blank({C, 2 * H, 2 * W});
  auto x = input.values();
  auto o = out.mutable_values();
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t y = 0; y < 2 * H; ++y)
      for (std::size_t xo = 0; xo < 2 * W; ++xo)
        o[(c * 2 * H + y) * 2 * W + xo] = x[(c * H + y / 2) * W + xo / 2];
  if (Tape *tape = tape_for({&input})) {
    out.set_requires_grad(true);
    tape->record("upsample_nearest2d", [xn = input.node(), on = out.node(), C,
                                        H, W] {
      if (on->grad.empty()) return;
      auto g = xn->grad_buffer();
      for (std::size_t c = 0; c < C; ++c)
        for (std::size_t y = 0; y < 2 * H; ++y)
          for (std::size_t xo = 0; xo < 2 * W; ++xo)
            g[(c * H + y / 2) * W + xo / 2] +=
                on->grad[(c * 2 * H + y) * 2 * W + xo];
    });
  }
  return out;
}

Tensor upsample_linear_time(const Tensor &input, std::size_t factor) {
  require(input.rank() == 1 || input.rank() == 2,
          "upsample_linear_time: expected [T] or [T,C], got " +
              to_string(input.shape()));
  require(factor >= 1, "upsample_linear_time: factor must be >= 1");
  const std::size_t T = input.dim(0);
  const std::size_t C = input.rank() == 2 ? input.dim(1) : 1;
  if (T < 2)
    throw ShapeError("upsample_linear_time: need at least 2 frames, got " +
                     std::to_string(T));
  const std::size_t To = T * factor;
  Shape shape = input.shape();
  shape[0] = To;
  Tensor out = Tensor::zeros(shape);

  // Source index and interpolation weight for each output frame.
  std::vector<std::size_t> lo(To);
  std::vector<double> frac(To);
  for (std::size_t j = 0; j < To; ++j) {
    const double pos = To == 1 ? 0.0
                               : static_cast<double>(j) * static_cast<double>(T - 1) /
                                     static_cast<double>(To - 1);
    std::size_t i0 = static_cast<std::size_t>(std::floor(pos));
    if (i0 > T - 2) i0 = T - 2;
    lo[j] = i0;
    frac[j] = pos - static_cast<double>(i0);
  }
  auto x = input.values();
  auto o = out.mutable_values();
  for (std::size_t j = 0; j < To; ++j)
    for (std::size_t c = 0; c < C; ++c)
      o[j * C + c] = (1.0 - frac[j]) * x[lo[j] * C + c] +
                     frac[j] * x[(lo[j] + 1) * C + c];
  if (Tape *tape = tape_for({&input})) {
    out.set_requires_grad(true);
    tape->record("upsample_linear_time",
                 [xn = input.node(), on = out.node(), lo = std::move(lo),
                  frac = std::move(frac), C] {
                   if (on->grad.empty()) return;
                   auto g = xn->grad_buffer();
                   for (std::size_t j = 0; j < lo.size(); ++j)
                     for (std::size_t c = 0; c < C; ++c) {
                       const double go = on->grad[j * C + c];
                       g[lo[j] * C + c] += (1.0 - frac[j]) * go;
                       g[(lo[j] + 1) * C + c] += frac[j] * go;
                     }
                 });
  }
  return out;
}

Tensor dense(const Tensor &input, const Tensor &weight, const Tensor &bias) {
  require(weight.rank() == 2, "dense: weight must be [D_in,D_out], got " +
                                  to_string(weight.shape()));
  require(input.rank() >= 1, "dense: input must have at least one axis");
  const std::size_t Din = weight.dim(0), Dout = weight.dim(1);
  require(input.shape().back() == Din,
          "dense: input " + to_string(input.shape()) +
              " does not end in D_in=" + std::to_string(Din));
  require(bias.rank() == 1 && bias.dim(0) == Dout,
          "dense: bias must be [" + std::to_string(Dout) + "], got " +
              to_string(bias.shape()));
  const std::size_t rows = input.size() / Din;
  Shape shape = input.shape();
  shape.back() = Dout;
  Tensor out = Tensor::zeros(shape);

  auto X = cmap(input.values(), rows, Din);
  auto Wm = cmap(weight.values(), Din, Dout);
  auto b = cvec(bias.values());
  auto O = map(out.mutable_values(), rows, Dout);
  O.noalias() = X * Wm;
  O.rowwise() += b.transpose();

  if (Tape *tape = tape_for({&input, &weight, &bias})) {
    out.set_requires_grad(true);
    tape->record("dense", [xn = input.node(), wn = weight.node(),
                           bn = bias.node(), on = out.node(), rows, Din, Dout] {
      if (on->grad.empty()) return;
      auto G = cmap(on->grad, rows, Dout);
      if (xn->requires_grad)
        map(xn->grad_buffer(), rows, Din).noalias() +=
            G * cmap(wn->data, Din, Dout).transpose();
      if (wn->requires_grad)
        map(wn->grad_buffer(), Din, Dout).noalias() +=
            cmap(xn->data, rows, Din).transpose() * G;
      if (bn->requires_grad)
        vec(bn->grad_buffer()) += G.colwise().sum().transpose();
    });
  }
  return out;
}

Tensor concat_features(const Tensor &a, const Tensor &b) {
  require(a.rank() == 2 && b.rank() == 2 && a.dim(0) == b.dim(0),
          "concat_features: expected [T,A] and [T,B], got " +
              to_string(a.shape()) + " and " + to_string(b.shape()));
  const std::size_t T = a.dim(0), A = a.dim(1), B = b.dim(1);
  Tensor out = Tensor::blank({T, A + B});
  auto O = map(out.mutable_values(), T, A + B);
  O.leftCols(A) = cmap(a.values(), T, A);
  O.rightCols(B) = cmap(b.values(), T, B);
  if (Tape *tape = tape_for({&a, &b})) {
    out.set_requires_grad(true);
    tape->record("concat_features",
                 [an = a.node(), bn = b.node(), on = out.node(), T, A, B] {
                   if (on->grad.empty()) return;
                   auto G = cmap(on->grad, T, A + B);
                   if (an->requires_grad)
                     map(an->grad_buffer(), T, A) += G.leftCols(A);
                   if (bn->requires_grad)
                     map(bn->grad_buffer(), T, B) += G.rightCols(B);
                 });
  }
  return out;
}

Tensor bce(const Tensor &pred, const Tensor &target, const Tensor &weight) {
  require(pred.shape() == target.shape() && pred.shape() == weight.shape(),
          "bce: pred/target/weight shapes differ: " + to_string(pred.shape()) +
              ", " + to_string(target.shape()) + ", " +
              to_string(weight.shape()));
  auto p = pred.values(), y = target.values(), w = weight.values();
  double total_w = 0.0, loss = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (std::isnan(p[i])) throw std::invalid_argument("bce: NaN prediction");
    const double pc = std::clamp(p[i], kBceClamp, 1.0 - kBceClamp);
    loss -= w[i] * (y[i] * std::log(pc) + (1.0 - y[i]) * std::log(1.0 - pc));
    total_w += w[i];
  }
  Tensor out = Tensor::scalar(total_w > 0 ? loss / total_w : 0.0);
  if (Tape *tape = tape_for({&pred})) {
    out.set_requires_grad(true);
    tape->record("bce", [pn = pred.node(), yn = target.node(),
                         wn = weight.node(), on = out.node(), total_w] {
      if (on->grad.empty() || total_w <= 0) return;
      auto g = pn->grad_buffer();
      const double go = on->grad[0] / total_w;
      for (std::size_t i = 0; i < g.size(); ++i) {
        const double p = pn->data[i];
        if (p < kBceClamp || p > 1.0 - kBceClamp) continue; // clamp is flat
        const double y = yn->data[i];
        g[i] += go * wn->data[i] * (p - y) / (p * (1.0 - p));
      }
    });
  }
  return out;
}

Tensor bce(const Tensor &pred, const Tensor &target) {
  return bce(pred, target, Tensor::full(pred.shape(), 1.0));
}

} // namespace adamd::num
