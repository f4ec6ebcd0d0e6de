#include <cmath>

#include "common/errors.hpp"
#include "doctest.h"
#include "numerics/gradcheck.hpp"
#include "numerics/ops.hpp"
#include "test_util.hpp"

using namespace lesion;
using lesion::testing::random_tensor;

namespace {
constexpr Scalar kStep = 1e-5;
}

TEST_CASE("matmul identity and selector") {
  Tape tape(false);
  const Var eye = tape.constant(Tensor::matrix(2, 2, {1, 0, 0, 1}));
  const Var m = tape.constant(Tensor::matrix(2, 2, {1, 2, 3, 4}));
  CHECK(ops::matmul(eye, m).value() == m.value());

  const Var sel = tape.constant(Tensor::matrix(1, 2, {1, 0}));
  const Var col = tape.constant(Tensor::matrix(2, 1, {7.5, -2}));
  const Tensor picked = ops::matmul(sel, col).value();
  CHECK(picked.shape() == Shape{1, 1});
  CHECK(picked[0] == 7.5);
}

TEST_CASE("matmul rejects mismatched inner dims and names both shapes") {
  Tape tape(false);
  const Var a = tape.constant(Tensor({3, 4}));
  const Var b = tape.constant(Tensor({3, 2}));
  try {
    ops::matmul(a, b);
    FAIL("expected DimensionError");
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("[3x4]") != std::string::npos);
    CHECK(msg.find("[3x2]") != std::string::npos);
  }
}

TEST_CASE("matmul gradient matches central differences") {
  Rng rng(11);
  const MultiScalarFn f = [](Tape&, std::span<const Var> v) {
    const Var c = ops::matmul(v[0], v[1]);
    return ops::sum(ops::mul(c, c));
  };
  const auto report = finite_difference_check(f, {random_tensor(rng, {3, 4}), random_tensor(rng, {4, 2})}, kStep);
  CHECK(report.max_rel_error < 1e-6);
}

TEST_CASE("softmax rows: uniform, stable and normalized") {
  Tape tape(false);
  const Tensor uniform = ops::softmax_rows(tape.constant(Tensor::matrix(1, 3, {0, 0, 0}))).value();
  for (auto v : uniform.data()) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

  const Tensor big = ops::softmax_rows(tape.constant(Tensor::matrix(1, 2, {1000, 0}))).value();
  CHECK(big[0] == 1.0);
  CHECK(big[1] == 0.0);
  CHECK(big.all_finite());

  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const Tensor x = random_tensor(rng, {4, 5}, -1000, 1000);
    const Tensor y = ops::softmax_rows(tape.constant(x)).value();
    for (std::size_t r = 0; r < 4; ++r) {
      double s = 0;
      for (std::size_t c = 0; c < 5; ++c) {
        CHECK(y.at(r, c) >= 0);
        s += y.at(r, c);
      }
      CHECK(std::abs(s - 1) < 1e-6);
    }
  }
}

TEST_CASE("softmax Jacobian matches central differences") {
  Rng rng(5);
  const Tensor weights = random_tensor(rng, {4, 5});
  const ScalarFn f = [&](Tape& t, Var x) { return ops::sum(ops::mul(ops::softmax_rows(x), t.constant(weights))); };
  CHECK(finite_difference_check(f, random_tensor(rng, {4, 5}, -2, 2), kStep) < 1e-6);
}

TEST_CASE("elementwise ops: identity, annihilator, gradients") {
  Rng rng(9);
  Tape tape(false);
  const Tensor a = random_tensor(rng, {3, 3});
  CHECK(ops::mul(tape.constant(a), tape.constant(Tensor::ones({3, 3}))).value() == a);
  CHECK(ops::mul(tape.constant(a), tape.constant(Tensor::zeros({3, 3}))).value() == Tensor::zeros({3, 3}));
  CHECK_THROWS_AS(ops::add(tape.constant(a), tape.constant(Tensor({3, 2}))), DimensionError);

  const MultiScalarFn f = [](Tape&, std::span<const Var> v) {
    const Var prod = ops::mul(v[0], v[1]);
    const Var diff = ops::sub(prod, ops::scale(v[0], 0.5));
    return ops::sum(ops::mul(diff, ops::add(v[1], v[1])));
  };
  const auto report = finite_difference_check(f, {random_tensor(rng, {3, 4}), random_tensor(rng, {3, 4})}, kStep);
  CHECK(report.max_rel_error < 1e-6);
}

TEST_CASE("layer norm: constant rows, symmetric rows, moments and gradient") {
  Tape tape(false);
  const Var gain = tape.constant(Tensor::ones({1, 4}));
  const Var bias = tape.constant(Tensor::zeros({1, 4}));
  const Tensor flat = ops::layer_norm(tape.constant(Tensor({2, 4}, Scalar(3.5))), gain, bias, 1e-5).value();
  CHECK(flat == Tensor::zeros({2, 4}));

  const Var g2 = tape.constant(Tensor::ones({1, 2}));
  const Var b2 = tape.constant(Tensor::zeros({1, 2}));
  const Tensor sym = ops::layer_norm(tape.constant(Tensor::matrix(1, 2, {1, -1})), g2, b2, 1e-12).value();
  CHECK(sym[0] == doctest::Approx(1).epsilon(1e-9));
  CHECK(sym[1] == doctest::Approx(-1).epsilon(1e-9));

  Rng rng(21);
  const Tensor x = random_tensor(rng, {3, 6}, -4, 4);
  const Tensor y = ops::layer_norm(tape.constant(x), tape.constant(Tensor::ones({1, 6})),
                                   tape.constant(Tensor::zeros({1, 6})), 1e-5)
                       .value();
  for (std::size_t r = 0; r < 3; ++r) {
    double mean = 0, var = 0;
    for (std::size_t c = 0; c < 6; ++c) mean += y.at(r, c) / 6;
    for (std::size_t c = 0; c < 6; ++c) var += (y.at(r, c) - mean) * (y.at(r, c) - mean) / 6;
    CHECK(std::abs(mean) < 1e-5);
    CHECK(std::abs(var - 1) < 1e-5);
  }

  const Tensor weights = random_tensor(rng, {3, 6});
  const MultiScalarFn f = [&](Tape& t, std::span<const Var> v) {
    return ops::sum(ops::mul(ops::layer_norm(v[0], v[1], v[2], 1e-5), t.constant(weights)));
  };
  const auto report = finite_difference_check(
      f, {x, random_tensor(rng, {1, 6}, 0.5, 1.5), random_tensor(rng, {1, 6})}, kStep);
  CHECK(report.max_rel_error < 1e-5);
}

TEST_CASE("gelu: zero, asymptotes, monotone grid, gradient") {
  Tape tape(false);
  CHECK(ops::gelu(tape.constant(Tensor::scalar(0))).value()[0] == 0);
  CHECK(ops::gelu(tape.constant(Tensor::scalar(10))).value()[0] == doctest::Approx(10).epsilon(1e-9));
  CHECK(std::abs(ops::gelu(tape.constant(Tensor::scalar(-10))).value()[0]) < 1e-9);

  Tensor grid({1, 61});
  for (std::size_t i = 0; i < 61; ++i) grid[i] = -3 + 0.1 * static_cast<Scalar>(i);
  const Tensor y = ops::gelu(tape.constant(grid)).value();
  // tanh-GELU has its minimum near -0.75; it is monotone on either side.
  for (std::size_t i = 24; i + 1 < 61; ++i) CHECK(y[i + 1] > y[i]);
  for (std::size_t i = 0; i + 1 < 22; ++i) CHECK(y[i + 1] < y[i]);

  const ScalarFn f = [](Tape&, Var x) { return ops::sum(ops::gelu(x)); };
  CHECK(finite_difference_check(f, grid, kStep) < 1e-5);
}

TEST_CASE("backward: sum and quadratic") {
  Rng rng(4);
  const Tensor x = random_tensor(rng, {2, 3});
  {
    Tape tape;
    const Var v = tape.variable(x);
    tape.backward(ops::sum(v));
    CHECK(v.grad() == Tensor::ones({2, 3}));
  }
  {
    Tape tape;
    const Var v = tape.variable(x);
    tape.backward(ops::scale(ops::sum(ops::mul(v, v)), 0.5));
    CHECK(lesion::testing::max_abs_diff(v.grad(), x) == 0);
  }
}

TEST_CASE("backward errors and unused parameters") {
  Tape tape;
  const Var used = tape.variable(Tensor::ones({2, 2}));
  const Var unused = tape.variable(Tensor::ones({3}));
  CHECK_THROWS_AS(tape.backward(used), DimensionError);
  Tape other;
  const Var foreign = other.variable(Tensor::scalar(1));
  CHECK_THROWS_AS(tape.backward(ops::sum(foreign)), std::invalid_argument);

  tape.backward(ops::sum(used));
  CHECK(unused.grad() == Tensor::zeros({3}));
}

TEST_CASE("forward ops flag non-finite results") {
  Tape tape(false);
  const Var x = tape.constant(Tensor::scalar(0));
  CHECK_THROWS_AS(ops::reciprocal(x), NumericError);
  Tensor bad = Tensor::scalar(0);
  bad[0] = std::numeric_limits<Scalar>::quiet_NaN();
  CHECK_THROWS_AS(tape.constant(bad), NumericError);
}

TEST_CASE("finite-difference check: exact for sums, O(h^2) for squares") {
  const ScalarFn sum_fn = [](Tape&, Var x) { return ops::sum(x); };
  Rng rng(1);
  CHECK(finite_difference_check(sum_fn, random_tensor(rng, {2, 2}), kStep) < 1e-9);

  const ScalarFn half_sq = [](Tape&, Var x) { return ops::scale(ops::sum(ops::mul(x, x)), 0.5); };
  CHECK(finite_difference_check(half_sq, Tensor::scalar(3), kStep) < 1e-9);
}

TEST_CASE("property: every op's gradient matches finite differences on random shapes") {
  Rng rng(2024);
  for (int trial = 0; trial < 20; ++trial) {
    const auto m = 1 + rng.below(8), n = 1 + rng.below(8), k = 1 + rng.below(8);
    const Tensor w = random_tensor(rng, {m, n});
    const MultiScalarFn f = [&](Tape& t, std::span<const Var> v) {
      Var h = ops::matmul(v[0], v[1]);                        // m x n
      h = ops::layer_norm(h, v[2], v[3], 1e-5);
      h = ops::gelu(h);
      h = ops::softmax_rows(ops::add(h, ops::repeat_rows(v[3], m)));
      h = ops::concat_cols(std::vector<Var>{ops::slice_cols(h, 0, 1), h});
      h = ops::slice_cols(ops::transpose(ops::transpose(h)), 1, n);
      return ops::sum(ops::mul(h, t.constant(w)));
    };
    const auto report = finite_difference_check(
        f, {random_tensor(rng, {m, k}), random_tensor(rng, {k, n}), random_tensor(rng, {1, n}, 0.5, 1.5),
            random_tensor(rng, {1, n})},
        kStep);
    CHECK_MESSAGE(report.max_rel_error < 1e-5, "trial " << trial << " shape " << m << "x" << k << "x" << n);
  }
}

TEST_CASE("property: backward is linear in the loss") {
  Rng rng(77);
  for (int trial = 0; trial < 10; ++trial) {
    const Tensor x0 = random_tensor(rng, {3, 3});
    const Tensor wf = random_tensor(rng, {3, 3});
    auto f = [&](Var x) { return ops::sum(ops::mul(ops::softmax_rows(x), x.tape().constant(wf))); };
    auto g = [](Var x) { return ops::sum(ops::gelu(ops::matmul(x, x))); };

    auto grad_of = [&](int which) {
      Tape tape;
      const Var x = tape.variable(x0);
      const Var loss = which == 0 ? f(x) : which == 1 ? g(x) : ops::add(f(x), g(x));
      tape.backward(loss);
      return x.grad();
    };
    const Tensor gf = grad_of(0), gg = grad_of(1), gsum = grad_of(2);
    for (std::size_t i = 0; i < gsum.numel(); ++i) CHECK(std::abs(gsum[i] - (gf[i] + gg[i])) < 1e-12);
  }
}

TEST_CASE("determinism: identical inputs give bit-identical values and gradients") {
  Rng rng(8);
  const Tensor x0 = random_tensor(rng, {4, 4});
  auto run = [&] {
    Tape tape;
    const Var x = tape.variable(x0);
    const Var y = ops::gelu(ops::matmul(ops::softmax_rows(x), x));
    tape.backward(ops::sum(ops::mul(y, y)));
    return std::make_pair(y.value(), x.grad());
  };
  const auto a = run(), b = run();
  CHECK(lesion::testing::bit_equal(a.first, b.first));
  CHECK(lesion::testing::bit_equal(a.second, b.second));
}

TEST_CASE("tape records ops in topological order") {
  Tape tape;
  const Var a = tape.variable(Tensor::ones({2, 2}));
  const Var b = ops::matmul(a, a);
  const Var c = ops::sum(ops::add(b, a));
  for (std::size_t id = 0; id < tape.size(); ++id)
    for (auto in : tape.inputs(id)) CHECK(in < id);
  CHECK(tape.op(b.id()) == "matmul");
  tape.backward(c);
  CHECK(tape.has_gradients());
}
