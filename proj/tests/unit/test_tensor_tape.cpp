// SPDX-License-Identifier: Apache-2.0
#include "doctest.h"

#include "adamd/numerics/ops.hpp"
#include "adamd/numerics/tape.hpp"
#include "test_support.hpp"

using namespace adamd::num;

TEST_CASE("tensor construction validates extents") {
  CHECK_THROWS_AS(Tensor::from({2, 3}, std::vector<double>(5)), ShapeError);
  const Tensor t = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
  CHECK(t.size() == 6);
  CHECK(t.dim(1) == 3);
  CHECK_THROWS_AS(t.dim(2), ShapeError);
  CHECK_THROWS_AS(t.item(), ShapeError);
  CHECK(Tensor::scalar(2.5).item() == 2.5);
  CHECK_FALSE(t.has_grad());
}

TEST_CASE("ops outside a tape scope do not record or require grad") {
  const Tensor a = Tensor::from({2}, {1, 2}, true);
  const Tensor b = add(a, a);
  CHECK_FALSE(b.requires_grad());
}

TEST_CASE("records appear in execution order and backward consumes them") {
  Tape tape;
  Tensor x = Tensor::from({3}, {1, -2, 3}, true);
  {
    Tape::Scope scope(tape);
    const Tensor y = sum(relu(scale(x, 2.0)));
    REQUIRE(tape.size() == 3);
    CHECK(tape.records()[0].op == "scale");
    CHECK(tape.records()[1].op == "relu");
    CHECK(tape.records()[2].op == "sum");
    tape.backward(y);
  }
  CHECK(tape.size() == 0);
  CHECK(x.grad()[0] == 2.0);
  CHECK(x.grad()[1] == 0.0);
  CHECK(x.grad()[2] == 2.0);
}

TEST_CASE("pause suspends recording") {
  Tape tape;
  Tape::Scope scope(tape);
  const Tensor x = Tensor::from({2}, {1, 2}, true);
  {
    Tape::Pause pause;
    (void)sum(x);
  }
  CHECK(tape.size() == 0);
  (void)sum(x);
  CHECK(tape.size() == 1);
}

TEST_CASE("backward of a sum equals the sum of backwards") {
  std::mt19937_64 rng(7);
  for (int seed = 0; seed < 20; ++seed) {
    Tensor x = adamd::testing::random_tensor({5}, rng);
    auto f = [&] { return sum(sigmoid(x)); };
    auto g = [&] { return sum(relu(scale(x, -3.0))); };

    std::vector<double> separate(5, 0.0);
    for (auto fn : {std::function<Tensor()>(f), std::function<Tensor()>(g)}) {
      x.zero_grad();
      Tape tape;
      Tape::Scope scope(tape);
      tape.backward(fn());
      for (int i = 0; i < 5; ++i) separate[i] += x.grad()[i];
    }
    x.zero_grad();
    Tape tape;
    Tape::Scope scope(tape);
    tape.backward(add(f(), g()));
    for (int i = 0; i < 5; ++i) CHECK(x.grad()[i] == doctest::Approx(separate[i]).epsilon(1e-14));
  }
}

TEST_CASE("forward passes are bitwise deterministic") {
  std::mt19937_64 rng(3);
  const Tensor x = adamd::testing::random_tensor({2, 8, 8}, rng);
  const Tensor k = adamd::testing::random_tensor({3, 2, 3, 3}, rng);
  const Tensor a = conv2d(x, k);
  const Tensor b = conv2d(x, k);
  CHECK(std::equal(a.values().begin(), a.values().end(), b.values().begin()));
}

TEST_CASE("backward rejects non-scalar roots") {
  Tape tape;
  CHECK_THROWS_AS(tape.backward(Tensor::zeros({2})), ShapeError);
}
