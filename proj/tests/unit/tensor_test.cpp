#include <cmath>
#include <numeric>

#include "doctest.h"
#include "mtd/rng.hpp"
#include "mtd/tensor.hpp"
#include "mtd/verify/gradcheck.hpp"
#include "mtd/verify/oracles.hpp"
#include "mtd/verify/suite.hpp"

using namespace mtd;

namespace {

Tensor random_tensor(Rng& rng, Shape shape) {
  Tensor t(std::move(shape));
  for (auto& x : t.data()) x = rng.normal();
  return t;
}

}  // namespace

TEST_SUITE("tensor") {

TEST_CASE("matmul agrees with the triple loop") {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const auto m = static_cast<std::size_t>(rng.integer(1, 6));
    const auto k = static_cast<std::size_t>(rng.integer(1, 6));
    const auto n = static_cast<std::size_t>(rng.integer(1, 6));
    Tape tape;
    const Tensor a = random_tensor(rng, {m, k}), b = random_tensor(rng, {k, n});
    const Var c = matmul(tape.leaf(a), tape.leaf(b));
    CHECK(c.shape() == Shape{m, n});
    const auto ref = verify::naive_matmul(a.data(), b.data(), m, k, n);
    for (std::size_t i = 0; i < ref.size(); ++i) CHECK(c.value()[i] == doctest::Approx(ref[i]).epsilon(1e-14));
  }
  Tape tape;
  Rng r2(3);
  const Var c = matmul(tape.leaf(random_tensor(r2, {2, 3})), tape.leaf(random_tensor(r2, {3, 4})));
  CHECK(c.shape() == Shape{2, 4});
}

TEST_CASE("shape mismatch names the primitive and both shapes") {
  Tape tape;
  const Var a = tape.leaf(Tensor(Shape{2, 3}));
  const Var b = tape.leaf(Tensor(Shape{2, 3}));
  try {
    matmul(a, b);
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("matmul") != std::string::npos);
    CHECK(msg.find("[2,3]") != std::string::npos);
  }
  CHECK_THROWS_AS(add(a, tape.leaf(Tensor(Shape{3, 2}))), ShapeError);
  CHECK_THROWS_AS(add_row(a, tape.leaf(Tensor(Shape{2}))), ShapeError);
}

TEST_CASE("sigmoid and segment softmax values") {
  Tape tape;
  CHECK(sigmoid(tape.leaf(Tensor::scalar(0.0))).value().item() == 0.5);
  const Var s = segment_softmax(tape.leaf(Tensor::vector({1.0, 1.0, 1.0})), {{0, 1, 2}});
  for (double v : s.value().data()) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  const Var t = segment_softmax(tape.leaf(Tensor::vector({0.0, std::log(3.0), 5.0})), {{0, 1}});
  CHECK(t.value()[0] == doctest::Approx(0.25));
  CHECK(t.value()[1] == doctest::Approx(0.75));
  CHECK(t.value()[2] == 0.0);
  CHECK_THROWS(segment_softmax(tape.leaf(Tensor::vector({1.0})), {{}}));
}

TEST_CASE("backward of sum of squares and of sigmoid") {
  {
    Tape tape;
    const Var w = tape.leaf(Tensor::vector({1, 2, 3}));
    tape.backward(sum(mul(w, w)));
    const Tensor g = tape.grad(w);
    CHECK(g[0] == 2.0);
    CHECK(g[1] == 4.0);
    CHECK(g[2] == 6.0);
  }
  {
    Tape tape;
    const Var x = tape.leaf(Tensor::scalar(0.0));
    tape.backward(sigmoid(x));
    CHECK(tape.grad(x).item() == doctest::Approx(0.25).epsilon(1e-15));
  }
}

TEST_CASE("backward rejects non-scalar losses and foreign variables") {
  Tape tape;
  const Var w = tape.leaf(Tensor::vector({1, 2}));
  CHECK_THROWS(tape.backward(w));
  Tape other;
  const Var v = other.leaf(Tensor::vector({1, 2}));
  CHECK_THROWS(add(w, v));
  tape.backward(sum(w));
  CHECK_THROWS(tape.backward(sum(w)));
}

TEST_CASE("gradients of unused leaves are zero") {
  Tape tape;
  const Var a = tape.leaf(Tensor::vector({1, 2}));
  const Var b = tape.leaf(Tensor::vector({3, 4}));
  tape.backward(sum(a));
  CHECK(tape.grad(b) == Tensor(Shape{2}, 0.0));
}

TEST_CASE("every primitive passes the finite-difference check") {
  for (const auto& c : verify::primitive_cases(5)) {
    CAPTURE(c.name);
    const auto r = verify::check_gradients(c.build, c.inputs, verify::kGradStep);
    CHECK(r.max_error <= verify::kGradTolerance);
  }
}

TEST_CASE("a sign fault in any backward rule is caught") {
  const auto cases = verify::primitive_cases(5);
  for (Primitive p : verify::differentiable_primitives()) {
    const std::string name = primitive_name(p);
    CAPTURE(name);
    debug::inject_sign_fault(p);
    double worst = 0.0;
    for (const auto& c : cases) {
      if (c.primitive != p) continue;
      worst = std::max(worst, verify::check_gradients(c.build, c.inputs, verify::kGradStep).max_error);
    }
    const auto model = verify::model_gradient_check(ModelKind::mtd_gnn, 5);
    debug::inject_sign_fault(std::nullopt);
    CHECK(std::max(worst, model.max_error) > verify::kGradTolerance);
  }
}

TEST_CASE("log clamps and bce with logits stays finite") {
  Tape tape;
  CHECK(log(tape.leaf(Tensor::scalar(0.0))).value().item() == doctest::Approx(std::log(kLogClamp)));
  const std::vector<double> y = {1.0, 0.0}, w = {1.0, 1.0};
  const Var l = bce_with_logits(tape.leaf(Tensor::vector({-800.0, 800.0})), y, w);
  CHECK(std::isfinite(l.value().item()));
  CHECK(l.value().item() == doctest::Approx(1600.0));
}

}  // TEST_SUITE
