// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cstring>
#include <string>
#include <vector>

#include "adamd/numerics/eigen_maps.hpp"
#include "adamd/numerics/ops.hpp"
#include "adamd/numerics/tape.hpp"

namespace adamd::num {

// The convolution runs on a zero-padded copy of the input laid out as a
// C_in x (Hp*Wp) matrix. For output pixel (y,x) let q = y*Wp + x; tap (i,j)
// reads padded column q + i*Wp + j. Computing every q in [0, L) with
// L = (Ho-1)*Wp + Wo turns the convolution into a sum of shifted channel
// mixes over flat rows; columns with x >= Wo are scratch and dropped. The
// input gradient is the same sum with a transposed kernel and negated shifts.

namespace {

struct ConvGeometry {
  std::size_t cin, h, w, cout, kh, kw;
  std::size_t pad_h, pad_w, hp, wp, ho, wo, span;
};

ConvGeometry geometry(const Tensor &input, const Tensor &kernel,
                      Padding padding) {
  if (input.rank() != 3)
    throw ShapeError("conv2d: input must be [C_in,H,W], got " +
                     to_string(input.shape()));
  if (kernel.rank() != 4)
    throw ShapeError("conv2d: kernel must be [C_out,C_in,kh,kw], got " +
                     to_string(kernel.shape()));
  ConvGeometry g{};
  g.cin = input.dim(0);
  g.h = input.dim(1);
  g.w = input.dim(2);
  g.cout = kernel.dim(0);
  g.kh = kernel.dim(2);
  g.kw = kernel.dim(3);
  if (kernel.dim(1) != g.cin)
    throw ShapeError("conv2d: input has " + std::to_string(g.cin) +
                     " channels but kernel " + to_string(kernel.shape()) +
                     " expects " + std::to_string(kernel.dim(1)));
  if (g.kh % 2 == 0 || g.kw % 2 == 0)
    throw ShapeError("conv2d: kernel extents must be odd, got " +
                     to_string(kernel.shape()));
  if (padding == Padding::same) {
    g.pad_h = g.kh / 2;
    g.pad_w = g.kw / 2;
  }
  g.hp = g.h + 2 * g.pad_h;
  g.wp = g.w + 2 * g.pad_w;
  if (g.hp < g.kh || g.wp < g.kw)
    throw ShapeError("conv2d: input " + to_string(input.shape()) +
                     " smaller than kernel " + to_string(kernel.shape()));
  g.ho = g.hp - g.kh + 1;
  g.wo = g.wp - g.kw + 1;
  g.span = (g.ho - 1) * g.wp + g.wo;
  return g;
}

RowMatrix padded(std::span<const double> x, const ConvGeometry &g) {
  RowMatrix p = RowMatrix::Zero(g.cin, g.hp * g.wp);
  const auto in = cmap(x, g.cin * g.h, g.w);
  for (std::size_t c = 0; c < g.cin; ++c)
    for (std::size_t y = 0; y < g.h; ++y)
      p.row(c).segment((y + g.pad_h) * g.wp + g.pad_w, g.w) = in.row(c * g.h + y);
  return p;
}

std::vector<std::size_t> tap_offsets(const ConvGeometry &g) {
  std::vector<std::size_t> off(g.kh * g.kw);
  for (std::size_t t = 0; t < off.size(); ++t) off[t] = (t / g.kw) * g.wp + t % g.kw;
  return off;
}

using Lanes = double __attribute__((vector_size(64)));
constexpr std::size_t kLanes = 8;

inline Lanes load(const double *p) {
  Lanes v;
  std::memcpy(&v, p, sizeof v);
  return v;
}

inline void store(double *p, Lanes v) { std::memcpy(p, &v, sizeof v); }

struct ShiftedMix {
  const double *w; // [nout, nin, taps]
  std::size_t nout, nin;
  std::span<const std::size_t> off;
  const double *in;
  std::size_t in_stride;
  double *out;
  std::size_t out_stride;
  std::size_t n;
  bool accumulate;
};

// out[o][p] (+)= sum_i sum_t w[o][i][t] * in[i][p + off[t]] for rows o0..o0+B.
template <std::size_t B> void mix_block(const ShiftedMix &m, std::size_t o0) {
  const std::size_t taps = m.off.size();
  std::vector<double> packed(m.nin * taps * B);
  for (std::size_t i = 0; i < m.nin; ++i)
    for (std::size_t t = 0; t < taps; ++t)
      for (std::size_t b = 0; b < B; ++b)
        packed[(i * taps + t) * B + b] = m.w[((o0 + b) * m.nin + i) * taps + t];

  const std::size_t vec_end = m.n - m.n % kLanes;
  for (std::size_t p = 0; p < vec_end; p += kLanes) {
    Lanes acc[B] = {};
    const double *wb = packed.data();
    for (std::size_t i = 0; i < m.nin; ++i) {
      const double *row = m.in + i * m.in_stride + p;
      for (std::size_t t = 0; t < taps; ++t, wb += B) {
        const Lanes x = load(row + m.off[t]);
#pragma GCC unroll 16
        for (std::size_t b = 0; b < B; ++b) acc[b] += wb[b] * x;
      }
    }
    for (std::size_t b = 0; b < B; ++b) {
      double *dst = m.out + (o0 + b) * m.out_stride + p;
      store(dst, m.accumulate ? load(dst) + acc[b] : acc[b]);
    }
  }
  for (std::size_t p = vec_end; p < m.n; ++p) {
    double acc[B] = {};
    const double *wb = packed.data();
    for (std::size_t i = 0; i < m.nin; ++i)
      for (std::size_t t = 0; t < taps; ++t, wb += B) {
        const double x = m.in[i * m.in_stride + p + m.off[t]];
        for (std::size_t b = 0; b < B; ++b) acc[b] += wb[b] * x;
      }
    for (std::size_t b = 0; b < B; ++b) {
      double &dst = m.out[(o0 + b) * m.out_stride + p];
      dst = m.accumulate ? dst + acc[b] : acc[b];
    }
  }
}

void shifted_mix(const ShiftedMix &m) {
  std::size_t o = 0;
  for (; o + 16 <= m.nout; o += 16) mix_block<16>(m, o);
  for (; o + 8 <= m.nout; o += 8) mix_block<8>(m, o);
  for (; o + 4 <= m.nout; o += 4) mix_block<4>(m, o);
  for (; o < m.nout; ++o) mix_block<1>(m, o);
}

// [C_out, C_in, taps] -> [C_in, C_out, taps]
std::vector<double> swap_channels(std::span<const double> w, const ConvGeometry &g) {
  const std::size_t taps = g.kh * g.kw;
  std::vector<double> out(w.size());
  for (std::size_t co = 0; co < g.cout; ++co)
    for (std::size_t ci = 0; ci < g.cin; ++ci)
      for (std::size_t t = 0; t < taps; ++t)
        out[(ci * g.cout + co) * taps + t] = w[(co * g.cin + ci) * taps + t];
  return out;
}

} // namespace

Tensor conv2d(const Tensor &input, const Tensor &kernel, const Tensor &bias,
              Padding padding) {
  const ConvGeometry g = geometry(input, kernel, padding);
  const bool has_bias = bias.size() > 0;
  if (has_bias && (bias.rank() != 1 || bias.dim(0) != g.cout))
    throw ShapeError("conv2d: bias must be [" + std::to_string(g.cout) +
                     "], got " + to_string(bias.shape()));

  Tensor out = Tensor::blank({g.cout, g.ho, g.wo});
  const std::size_t pointwise_off[1] = {0};
  if (g.kh == 1 && g.kw == 1) {
    const std::size_t hw = g.h * g.w;
    shifted_mix({kernel.values().data(), g.cout, g.cin, pointwise_off,
                 input.values().data(), hw, out.mutable_values().data(), hw, hw, false});
    if (has_bias) map(out.mutable_values(), g.cout, hw).colwise() += cvec(bias.values());
  } else {
    const RowMatrix in = padded(input.values(), g);
    const auto off = tap_offsets(g);
    RowMatrix z(g.cout, g.span);
    shifted_mix({kernel.values().data(), g.cout, g.cin, off, in.data(),
                 static_cast<std::size_t>(in.cols()), z.data(), g.span, g.span, false});
    auto o = map(out.mutable_values(), g.cout * g.ho, g.wo);
    for (std::size_t co = 0; co < g.cout; ++co) {
      const double b = has_bias ? bias.values()[co] : 0.0;
      for (std::size_t y = 0; y < g.ho; ++y)
        o.row(co * g.ho + y) = z.row(co).segment(y * g.wp, g.wo).array() + b;
    }
  }

  Tape *tape = Tape::active();
  const bool track = input.requires_grad() || kernel.requires_grad() ||
                     (has_bias && bias.requires_grad());
  if (tape && track) {
    out.set_requires_grad(true);
    tape->record("conv2d", [xn = input.node(), kn = kernel.node(),
                            bn = has_bias ? bias.node() : nullptr,
                            on = out.node(), g] {
      if (on->grad.empty()) return;
      if (bn && bn->requires_grad)
        vec(bn->grad_buffer()) += cmap(on->grad, g.cout, g.ho * g.wo).rowwise().sum();

      const std::size_t taps = g.kh * g.kw;
      if (g.kh == 1 && g.kw == 1) {
        const std::size_t hw = g.h * g.w;
        const auto dout = cmap(on->grad, g.cout, hw);
        if (kn->requires_grad)
          map(kn->grad_buffer(), g.cout, g.cin).noalias() +=
              dout * cmap(xn->data, g.cin, hw).transpose();
        if (xn->requires_grad) {
          const bool fresh = xn->grad.empty();
          if (fresh) xn->grad.resize(xn->data.size());
          const auto wt = swap_channels(kn->data, g);
          const std::size_t zero[1] = {0};
          shifted_mix({wt.data(), g.cin, g.cout, zero, on->grad.data(), hw,
                       xn->grad.data(), hw, hw, !fresh});
        }
        return;
      }

      // Output gradient on the flat padded grid, preceded by `front` zeros so
      // the input-gradient pass can use non-negative shifts.
      const auto off = tap_offsets(g);
      const std::size_t front = off.back();
      const std::size_t flat = g.hp * g.wp;
      RowMatrix dz = RowMatrix::Zero(g.cout, front + flat);
      const auto gout = cmap(on->grad, g.cout * g.ho, g.wo);
      for (std::size_t co = 0; co < g.cout; ++co)
        for (std::size_t y = 0; y < g.ho; ++y)
          dz.row(co).segment(front + y * g.wp, g.wo) = gout.row(co * g.ho + y);

      if (kn->requires_grad) {
        const RowMatrix in = padded(xn->data, g);
        const auto dzs = dz.middleCols(front, g.span);
        auto gk = map(kn->grad_buffer(), g.cout * g.cin, taps);
        // Column tiles keep the input window cache-resident across taps.
        constexpr std::size_t kTile = 1024;
        std::vector<RowMatrix> dtap(taps, RowMatrix::Zero(g.cout, g.cin));
        for (std::size_t c0 = 0; c0 < g.span; c0 += kTile) {
          const std::size_t n = std::min(kTile, g.span - c0);
          for (std::size_t t = 0; t < taps; ++t)
            dtap[t].noalias() +=
                dzs.middleCols(c0, n) * in.middleCols(c0 + off[t], n).transpose();
        }
        for (std::size_t t = 0; t < taps; ++t)
          for (std::size_t co = 0; co < g.cout; ++co)
            for (std::size_t ci = 0; ci < g.cin; ++ci) gk(co * g.cin + ci, t) += dtap[t](co, ci);
      }
      if (xn->requires_grad) {
        const auto wt = swap_channels(kn->data, g);
        std::vector<std::size_t> back(taps);
        for (std::size_t t = 0; t < taps; ++t) back[t] = front - off[t];
        RowMatrix din(g.cin, flat);
        shifted_mix({wt.data(), g.cin, g.cout, back, dz.data(),
                     static_cast<std::size_t>(dz.cols()), din.data(), flat, flat, false});
        const bool fresh = xn->grad.empty();
        if (fresh) xn->grad.resize(xn->data.size());
        auto gx = map(xn->grad, g.cin * g.h, g.w);
        for (std::size_t c = 0; c < g.cin; ++c)
          for (std::size_t y = 0; y < g.h; ++y) {
            const auto src = din.row(c).segment((y + g.pad_h) * g.wp + g.pad_w, g.w);
            if (fresh)
              gx.row(c * g.h + y) = src;
            else
              gx.row(c * g.h + y) += src;
          }
      }
    });
  }
  return out;
}

Tensor conv2d(const Tensor &input, const Tensor &kernel, Padding padding) {
  return conv2d(input, kernel, Tensor::zeros({0}), padding);
}

} // namespace adamd::num
