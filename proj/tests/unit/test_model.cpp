// SPDX-License-Identifier: Apache-2.0
#include "doctest.h"

#include <cmath>
#include <stdexcept>

#include "adamd/model/model.hpp"
#include "adamd/numerics/ops.hpp"
#include "model_support.hpp"

using namespace adamd;
using num::Shape;
using num::Tensor;
using testing::random_tensor;
using testing::toy_config;

namespace {

void zero(Tensor &t) {
  for (double &v : t.mutable_values()) v = 0.0;
}

void zero_block(model::ResidualParams &p) {
  for (Tensor *t : {&p.reduce_w, &p.reduce_b, &p.spatial_w, &p.spatial_b, &p.expand_w,
                    &p.expand_b})
    zero(*t);
}

Tensor param(model::AdamdModel &m, const std::string &name) {
  for (auto &p : m.parameters())
    if (p.name == name) return p.value;
  throw std::out_of_range(name);
}

bool bitwise_equal(const Tensor &a, const Tensor &b) {
  if (a.shape() != b.shape()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a.values()[i] != b.values()[i]) return false;
  return true;
}

// [T, C] or [C, T, W] reversed along the time axis.
Tensor flip_rows(const Tensor &x) {
  const std::size_t T = x.dim(0), C = x.size() / T;
  std::vector<double> v(x.size());
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t c = 0; c < C; ++c) v[t * C + c] = x.values()[(T - 1 - t) * C + c];
  return Tensor::from(x.shape(), v);
}

Tensor flip_map_time(const Tensor &x) {
  const std::size_t C = x.dim(0), T = x.dim(1), W = x.dim(2);
  std::vector<double> v(x.size());
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t w = 0; w < W; ++w)
        v[(c * T + t) * W + w] = x.values()[(c * T + (T - 1 - t)) * W + w];
  return Tensor::from(x.shape(), v);
}

// Rows [0,H) and [H,2H) of a [2H, M] matrix exchanged.
void swap_row_halves(Tensor &w) {
  const std::size_t rows = w.dim(0), cols = w.dim(1), half = rows / 2;
  auto v = w.mutable_values();
  for (std::size_t r = 0; r < half; ++r)
    for (std::size_t c = 0; c < cols; ++c) std::swap(v[r * cols + c], v[(r + half) * cols + c]);
}

void copy_values(Tensor &dst, const Tensor &src) {
  auto d = dst.mutable_values();
  auto s = src.values();
  std::copy(s.begin(), s.end(), d.begin());
}

} // namespace

TEST_CASE("residual block with zero weights is the identity") {
  model::ModelConfig cfg = toy_config();
  model::AdamdModel m(cfg, 3);
  zero_block(m.encoder_block(0));
  std::mt19937_64 rng(1);
  const Tensor x = random_tensor({4, 8, 6}, rng, -2.0, 2.0, false);
  CHECK(bitwise_equal(model::residual_block(x, m.encoder_block(0)), x));
}

TEST_CASE("residual block preserves shape and rejects channel mismatch") {
  model::ModelConfig cfg;
  cfg.hourglass.channels = 8;
  model::AdamdModel m(cfg, 4);
  std::mt19937_64 rng(2);
  const Tensor x = random_tensor({8, 64, 16}, rng, -1.0, 1.0, false);
  CHECK(model::residual_block(x, m.encoder_block(0)).shape() == Shape{8, 64, 16});
  CHECK_THROWS_AS(model::residual_block(random_tensor({4, 8, 8}, rng), m.encoder_block(0)),
                  num::ShapeError);
}

TEST_CASE("residual block gradient check") {
  model::AdamdModel m(toy_config(), 5);
  auto &p = m.encoder_block(1);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    std::mt19937_64 rng(seed);
    Tensor x = random_tensor({4, 6, 4}, rng);
    const Tensor probe = testing::probe_weights({96, 1}, seed);
    auto fn = [&] {
      return num::sum(num::dense(num::reshape(model::residual_block(x, p), {1, 96}), probe,
                                 Tensor::zeros({1})));
    };
    std::vector<Tensor> inputs{x, p.reduce_w, p.spatial_w, p.expand_w, p.expand_b};
    CHECK(num::grad_check(fn, inputs).max_rel_error < 1e-4);
  }
}

TEST_CASE("hourglass taps halve per level, coarsest first") {
  model::ModelConfig cfg = toy_config();
  cfg.hourglass.frames = 64;
  cfg.hourglass.mels = 16;
  model::AdamdModel m(cfg, 6);
  std::mt19937_64 rng(3);
  const auto taps = m.hourglass_forward(random_tensor({1, 64, 16}, rng, -1, 1, false));
  REQUIRE(taps.size() == 4);
  CHECK(taps[0].shape() == Shape{4, 8, 2});
  CHECK(taps[1].shape() == Shape{4, 16, 4});
  CHECK(taps[2].shape() == Shape{4, 32, 8});
  CHECK(taps[3].shape() == Shape{4, 64, 16});
}

TEST_CASE("hourglass rejects indivisible input") {
  model::AdamdModel m(toy_config(), 6);
  std::mt19937_64 rng(3);
  CHECK_THROWS_AS(m.hourglass_forward(random_tensor({1, 36, 16}, rng)), num::ShapeError);
  CHECK_THROWS_AS(m.hourglass_forward(random_tensor({1, 32, 12}, rng)), num::ShapeError);
  model::ModelConfig bad = toy_config();
  bad.hourglass.mels = 20;
  CHECK_THROWS_AS(model::AdamdModel(bad, 1), std::invalid_argument);
}

TEST_CASE("zero input with zeroed output layers stays finite") {
  model::AdamdModel m(toy_config(), 7);
  for (std::size_t k = 1; k <= 4; ++k) {
    zero(m.branch(k).dense_w);
    zero(m.branch(k).dense_b);
  }
  const auto preds = m.forward(Tensor::zeros({1, 32, 16}));
  for (const auto &p : preds.scales)
    for (double v : p.values()) CHECK(v == doctest::Approx(0.5));
}

TEST_CASE("decoder taps are upsample plus skip when decoder blocks are identities") {
  model::AdamdModel m(toy_config(), 8);
  zero_block(m.bottleneck_block());
  for (std::size_t l = 0; l < 3; ++l) zero_block(m.decoder_block(l));
  std::mt19937_64 rng(4);
  const Tensor feature = random_tensor({1, 32, 16}, rng, -1, 1, false);

  // Encoder path rebuilt from the public ops.
  Tensor x = num::conv2d(feature, param(m, "stem.weight"), param(m, "stem.bias"));
  std::vector<Tensor> skips;
  for (std::size_t l = 0; l < 3; ++l) {
    skips.push_back(model::residual_block(x, m.encoder_block(l)));
    x = num::maxpool2d(skips.back()).output;
  }
  std::vector<Tensor> expected{x};
  for (std::size_t l = 3; l-- > 0;)
    expected.push_back(num::add(num::upsample_nearest2d(expected.back()), skips[l]));

  const auto taps = m.hourglass_forward(feature);
  REQUIRE(taps.size() == expected.size());
  for (std::size_t k = 0; k < taps.size(); ++k) CHECK(bitwise_equal(taps[k], expected[k]));
}

TEST_CASE("branch output is a probability of length tau") {
  model::ModelConfig cfg = toy_config(3);
  cfg.hourglass.frames = 512;
  cfg.hourglass.mels = 128;
  model::AdamdModel m(cfg, 9);
  std::mt19937_64 rng(5);
  // Scale 1 reads 64 frames of 16 mels and upsamples by 8.
  const Tensor y = m.branch_forward(random_tensor({4, 64, 16}, rng, -3, 3, false), 1);
  CHECK(y.shape() == Shape{512, 3});
  for (double v : y.values()) {
    CHECK(v > 0.0);
    CHECK(v < 1.0);
  }
  CHECK_THROWS_AS(m.branch_forward(random_tensor({4, 64, 32}, rng), 1), num::ShapeError);
}

TEST_CASE("reversing time and swapping GRU directions reverses branch output") {
  model::ModelConfig cfg = toy_config(2);
  model::AdamdModel m(cfg, 10), mirrored(cfg, 11);
  const std::size_t scale = 3;
  auto &src = m.branch(scale);
  auto &dst = mirrored.branch(scale);

  // Conv kernel flipped along time.
  {
    const std::size_t n = src.conv_w.dim(1), kh = src.conv_w.dim(2), kw = src.conv_w.dim(3);
    auto out = dst.conv_w.mutable_values();
    for (std::size_t c = 0; c < n; ++c)
      for (std::size_t i = 0; i < kh; ++i)
        for (std::size_t j = 0; j < kw; ++j)
          out[(c * kh + i) * kw + j] = src.conv_w.values()[(c * kh + (kh - 1 - i)) * kw + j];
    copy_values(dst.conv_b, src.conv_b);
  }
  // Directions exchanged; from the second layer on the input halves swap too.
  for (std::size_t l = 0; l < src.layers.size(); ++l) {
    auto copy_dir = [&](model::GruDirection &to, const model::GruDirection &from) {
      copy_values(to.input_weight, from.input_weight);
      copy_values(to.recurrent_weight, from.recurrent_weight);
      copy_values(to.bias, from.bias);
      if (l > 0) swap_row_halves(to.input_weight);
    };
    copy_dir(dst.layers[l].forward, src.layers[l].backward);
    copy_dir(dst.layers[l].backward, src.layers[l].forward);
  }
  copy_values(dst.dense_w, src.dense_w);
  swap_row_halves(dst.dense_w);
  copy_values(dst.dense_b, src.dense_b);

  std::mt19937_64 rng(6);
  const Tensor map = random_tensor({4, 16, 8}, rng, -1, 1, false);
  const Tensor a = m.branch_forward(map, scale);
  const Tensor b = flip_rows(mirrored.branch_forward(flip_map_time(map), scale));
  REQUIRE(a.shape() == b.shape());
  for (std::size_t i = 0; i < a.size(); ++i)
    CHECK(a.values()[i] == doctest::Approx(b.values()[i]).epsilon(1e-12));
}

TEST_CASE("forward emits K length-tau predictions for one and three classes") {
  for (std::size_t classes : {1u, 3u}) {
    model::AdamdModel m(toy_config(classes), 12);
    std::mt19937_64 rng(7);
    const Tensor feature = random_tensor({1, 32, 16}, rng, -1, 1, false);
    const auto a = m.forward(feature);
    const auto b = m.forward(feature);
    REQUIRE(a.scales.size() == 4);
    for (std::size_t k = 0; k < 4; ++k) {
      CHECK(a.scales[k].shape() == Shape{32, classes});
      CHECK(bitwise_equal(a.scales[k], b.scales[k]));
    }
  }
}

TEST_CASE("variable frame counts keep every scale at input length") {
  model::AdamdModel m(toy_config(), 13);
  std::mt19937_64 rng(8);
  for (std::size_t frames : {16u, 24u, 40u}) {
    const auto p = m.forward(random_tensor({1, frames, 16}, rng, -1, 1, false));
    for (const auto &s : p.scales) CHECK(s.dim(0) == frames);
  }
}

TEST_CASE("parameter count follows the layer recipe") {
  const model::ModelConfig defaults;
  model::AdamdModel m(defaults, 0);
  CHECK(m.parameter_count() == testing::expected_parameter_count(defaults));
  CHECK(m.parameter_count() == 542088);

  model::ModelConfig desk;
  desk.hourglass.frames = 256;
  desk.hourglass.mels = 64;
  desk.branch.classes = 3;
  CHECK(model::AdamdModel(desk, 0).parameter_count() ==
        testing::expected_parameter_count(desk));
  CHECK(model::AdamdModel(toy_config(), 0).parameter_count() ==
        testing::expected_parameter_count(toy_config()));
}

TEST_CASE("same seed gives identical weights, different seed does not") {
  model::AdamdModel a(toy_config(), 21), b(toy_config(), 21), c(toy_config(), 22);
  CHECK(a.snapshot() == b.snapshot());
  CHECK(a.snapshot() != c.snapshot());
}

TEST_CASE("end-to-end gradient check on the toy configuration") {
  for (std::uint64_t seed = 0; seed < 3; ++seed)
    CHECK(testing::model_grad_error(seed, 3) < 1e-3);
}
