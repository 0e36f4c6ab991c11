// SPDX-License-Identifier: Apache-2.0
#include "doctest.h"

#include <cmath>

#include "adamd/numerics/grad_check.hpp"
#include "adamd/numerics/ops.hpp"
#include "test_support.hpp"

using namespace adamd::num;
using adamd::testing::probe_weights;
using adamd::testing::random_tensor;

namespace {

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Tensor flip_time(const Tensor &x) {
  const std::size_t T = x.dim(0), C = x.size() / T;
  std::vector<double> v(x.size());
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t c = 0; c < C; ++c) v[t * C + c] = x.values()[(T - 1 - t) * C + c];
  return Tensor::from(x.shape(), v);
}

} // namespace

TEST_CASE("gru single unit matches the gate equations by hand") {
  // D = H = 1, two steps.
  const double wz = 0.3, wr = -0.4, wn = 0.9, uz = 0.5, ur = 0.2, un = -0.7;
  const double bz = 0.1, br = 0.0, bn = -0.2;
  const std::vector<double> xs{0.8, -1.1};
  const Tensor y = gru(Tensor::from({2, 1}, xs), Tensor::from({1, 3}, {wz, wr, wn}),
                       Tensor::from({1, 3}, {uz, ur, un}), Tensor::from({3}, {bz, br, bn}),
                       false);
  double h = 0.0;
  for (std::size_t t = 0; t < 2; ++t) {
    const double z = logistic(wz * xs[t] + uz * h + bz);
    const double r = logistic(wr * xs[t] + ur * h + br);
    const double n = std::tanh(wn * xs[t] + un * (r * h) + bn);
    h = (1 - z) * n + z * h;
    CHECK(y.values()[t] == doctest::Approx(h).epsilon(1e-14));
  }
}

TEST_CASE("reverse gru equals forward gru on the flipped sequence") {
  std::mt19937_64 rng(11);
  const Tensor x = random_tensor({9, 3}, rng);
  const Tensor wx = random_tensor({3, 12}, rng);
  const Tensor wh = random_tensor({4, 12}, rng);
  const Tensor b = random_tensor({12}, rng);
  const Tensor rev = gru(x, wx, wh, b, true);
  const Tensor fwd = flip_time(gru(flip_time(x), wx, wh, b, false));
  for (std::size_t i = 0; i < rev.size(); ++i) CHECK(rev.values()[i] == fwd.values()[i]);
}

TEST_CASE("gru outputs stay inside (-1, 1)") {
  std::mt19937_64 rng(5);
  const Tensor y = gru(random_tensor({50, 4}, rng, -3, 3), random_tensor({4, 9}, rng, -2, 2),
                       random_tensor({3, 9}, rng, -2, 2), random_tensor({9}, rng), false);
  for (double v : y.values()) {
    CHECK(v > -1.0);
    CHECK(v < 1.0);
  }
  // Saturated gates round to exactly +-1 in double precision but never beyond.
  const Tensor sat = gru(random_tensor({50, 4}, rng, -20, 20), random_tensor({4, 9}, rng, -5, 5),
                         random_tensor({3, 9}, rng, -5, 5), random_tensor({9}, rng), false);
  for (double v : sat.values()) CHECK(std::abs(v) <= 1.0);
}

TEST_CASE("gru rejects inconsistent weights") {
  CHECK_THROWS_AS(gru(Tensor::zeros({4, 3}), Tensor::zeros({2, 6}), Tensor::zeros({2, 6}),
                      Tensor::zeros({6}), false),
                  ShapeError);
  CHECK_THROWS_AS(gru(Tensor::zeros({4, 3}), Tensor::zeros({3, 6}), Tensor::zeros({2, 5}),
                      Tensor::zeros({6}), false),
                  ShapeError);
}

TEST_CASE("gru gradient matches finite differences in both directions") {
  double worst = 0.0;
  for (int seed = 0; seed < 100; ++seed) {
    std::mt19937_64 rng(seed);
    Tensor x = random_tensor({6, 3}, rng);
    Tensor wx = random_tensor({3, 12}, rng);
    Tensor wh = random_tensor({4, 12}, rng);
    Tensor b = random_tensor({12}, rng);
    const bool reverse = seed % 2 == 1;
    const Tensor probe = probe_weights({24, 1}, seed);
    std::vector<Tensor> in{x, wx, wh, b};
    worst = std::max(worst, grad_check(
                                [&] {
                                  const Tensor y = gru(x, wx, wh, b, reverse);
                                  return sum(dense(reshape(y, {1, 24}), probe,
                                                   Tensor::zeros({1})));
                                },
                                in)
                                .max_rel_error);
  }
  CHECK(worst < 1e-4);
}
