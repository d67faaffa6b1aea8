#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "ensers/autodiff/gradient.hpp"
#include "ensers/error.hpp"

using namespace ensers;
using namespace ensers::ad;

namespace {

Tensor random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = u(rng);
  return t;
}

}  // namespace

TEST(Record, ElementwiseAdd) {
  Tape tape;
  Var a = tape.constant(Tensor::vector({1, 2}));
  Var b = tape.constant(Tensor::vector({3, 4}));
  EXPECT_EQ(add(a, b).value(), Tensor::vector({4, 6}));
}

TEST(Record, IdentityMatvec) {
  Tape tape;
  Var eye = tape.constant(Tensor::matrix(3, 3, {1, 0, 0, 0, 1, 0, 0, 0, 1}));
  Var x = tape.constant(Tensor::vector({0.3, -1.7, 2.5}));
  EXPECT_EQ(matvec(eye, x).value(), x.value());
  EXPECT_EQ(reshape(matmul(eye, reshape(x, {3, 1})), {3}).value(), x.value());
}

TEST(Record, SoftplusAtZero) {
  Tape tape;
  Var x = tape.constant(Tensor::scalar(0.0));
  EXPECT_NEAR(softplus(x).value().item(), std::log(2.0), 1e-15);
  EXPECT_NEAR(softplus(x).value().item(), 0.693147, 1e-6);
}

TEST(Record, ShapeMismatchNamesOpAndShapes) {
  Tape tape;
  Var a = tape.constant(Tensor::vector({1, 2}));
  Var b = tape.constant(Tensor::vector({1, 2, 3}));
  try {
    add(a, b);
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("add"), std::string::npos);
    EXPECT_NE(msg.find("[2]"), std::string::npos);
    EXPECT_NE(msg.find("[3]"), std::string::npos);
  }
  Var m = tape.constant(Tensor(Shape{2, 3}));
  EXPECT_THROW(matmul(m, m), ShapeError);
}

TEST(Record, NonFiniteIsAnError) {
  Tape tape;
  Var x = tape.constant(Tensor::vector({-1.0}));
  EXPECT_THROW(pow(x, 0.5), NonFiniteError);
}

TEST(Gradient, SoftplusSlopeAtZero) {
  Tape tape;
  Var x = tape.leaf(Tensor::scalar(0.0));
  EXPECT_DOUBLE_EQ(gradient(softplus(x), x).item(), 0.5);
}

TEST(Gradient, SecondDerivativeOfCube) {
  Tape tape;
  Var x = tape.leaf(Tensor::scalar(2.0));
  Var y = pow(x, 3.0);
  Var dy = gradient_graph(y, x);
  EXPECT_DOUBLE_EQ(dy.value().item(), 12.0);
  EXPECT_DOUBLE_EQ(gradient(dy, x).item(), 12.0);
}

TEST(Gradient, MseThroughMatvecMatchesFiniteDifferences) {
  std::mt19937_64 rng(0);
  const Tensor x = random_tensor({4}, rng);
  const Tensor y = random_tensor({4}, rng);
  ScalarFn f = [&](Tape& t, Var w) { return mse(matvec(w, t.constant(x)), t.constant(y)); };
  EXPECT_LT(check_gradient(f, random_tensor({4, 4}, rng), 1e-5), 1e-6);
}

TEST(Gradient, NonScalarOutputRejected) {
  Tape tape;
  Var x = tape.leaf(Tensor::vector({1, 2}));
  EXPECT_THROW(gradient(square(x), x), ShapeError);
}

TEST(Gradient, UnreachableLeafGivesZeros) {
  Tape tape;
  Var x = tape.leaf(Tensor::vector({1, 2}));
  Var unused = tape.leaf(Tensor(Shape{2, 3}, 1.0));
  Var y = sum(square(x));
  const Var targets[] = {x, unused};
  auto g = gradient(y, targets);
  EXPECT_EQ(g[0], Tensor::vector({2, 4}));
  EXPECT_EQ(g[1], Tensor(Shape{2, 3}, 0.0));
}

TEST(CheckGradient, SumOfSquares) {
  ScalarFn f = [](Tape&, Var x) { return sum(square(x)); };
  EXPECT_LT(check_gradient(f, Tensor::vector({1, 2, 3}), 1e-5), 1e-7);
}

TEST(CheckGradient, ConstantFunctionIsExact) {
  ScalarFn f = [](Tape& t, Var) { return t.constant(Tensor::scalar(3.5)); };
  EXPECT_EQ(check_gradient(f, Tensor::vector({1, 2, 3}), 1e-5), 0.0);
}

TEST(CheckGradient, TwoLayerTanh) {
  std::mt19937_64 rng(0);
  const Tensor w1 = random_tensor({5, 3}, rng), w2 = random_tensor({4, 5}, rng);
  ScalarFn f = [&](Tape& t, Var x) {
    Var h = tanh(matvec(t.constant(w1), x));
    return sum(tanh(matvec(t.constant(w2), h)));
  };
  EXPECT_LT(check_gradient(f, random_tensor({3}, rng), 1e-5), 1e-5);
}

TEST(CheckGradient, NonFiniteProbeIsAnError) {
  ScalarFn f = [](Tape&, Var x) { return sum(pow(x, 0.5)); };
  EXPECT_THROW(check_gradient(f, Tensor::vector({1e-7}), 1e-5), NonFiniteError);
}

TEST(Properties, HessianVectorProductsPerOp) {
  std::mt19937_64 rng(7);
  const Tensor m = random_tensor({3, 3}, rng);
  const auto idx = make_index({0, 2, 2, 5, 8});
  Stencil5 k{};
  for (double& v : k) v = std::uniform_real_distribution<double>(-1, 1)(rng);
  std::vector<std::pair<std::string, ScalarFn>> cases = {
      {"mul", [](Tape&, Var x) { return sum(mul(mul(x, x), x)); }},
      {"matmul", [&](Tape& t, Var x) { return sum(square(matmul(x, matmul(t.constant(m), x, false, true)))); }},
      {"matvec", [&](Tape& t, Var x) { return sum(pow(matvec(x, reshape(slice(x, 0, {3}), {3})), 3.0)); }},
      {"gather", [&](Tape&, Var x) { return sum(pow(gather(x, idx), 4.0)); }},
      {"sin_cos", [](Tape&, Var x) { return sum(mul(sin(x), cos(scale(x, 2.0)))); }},
      {"tanh", [](Tape&, Var x) { return sum(tanh(scale(x, 1.5))); }},
      {"softplus", [](Tape&, Var x) { return mean(softplus(scale(x, 3.0))); }},
      {"mse", [](Tape& t, Var x) { return mse(square(x), t.constant(Tensor(Shape{3, 3}, 0.2))); }},
      {"huber", [](Tape& t, Var x) { return huber(scale(pow(x, 3.0), 2.0), t.constant(Tensor(Shape{3, 3}, 0.1))); }},
      {"stencil", [&](Tape&, Var x) {
         Var big = reshape(repeat_rows(reshape(x, {9}), 5), {5, 9});
         return sum(square(stencil(big, k, true)));
       }},
  };
  for (auto& [name, f] : cases) {
    const Tensor at = random_tensor({3, 3}, rng);
    const Tensor v = random_tensor({3, 3}, rng);
    EXPECT_LT(check_hessian_vector(f, at, v, 1e-5), 1e-5) << name;
  }
}

TEST(Properties, ReplayIsBitIdentical) {
  std::mt19937_64 rng(3);
  Tape tape;
  Var w = tape.leaf(random_tensor({4, 4}, rng), "w");
  Var x = tape.leaf(random_tensor({4}, rng), "x");
  Var y = sum(softplus(matvec(w, tanh(x))));
  Var g = gradient_graph(y, x);
  Var z = sum(square(g));
  const Tensor first = z.value();
  const std::size_t n = tape.size();
  std::vector<Tensor> before;
  for (std::size_t i = 0; i < n; ++i) before.push_back(tape.node(i).value);
  tape.replay();
  for (std::size_t i = 0; i < n; ++i) EXPECT_EQ(tape.node(i).value, before[i]) << "node " << i;
  EXPECT_EQ(z.value(), first);

  // Changing a leaf and replaying matches a fresh recording.
  const Tensor x2 = random_tensor({4}, rng);
  tape.set_value(*tape.find_leaf("x"), x2);
  tape.replay();
  Tape fresh;
  Var w2 = fresh.leaf(w.value());
  Var xf = fresh.leaf(x2);
  Var zf = sum(square(gradient_graph(sum(softplus(matvec(w2, tanh(xf)))), xf)));
  EXPECT_EQ(z.value(), zf.value());
}

TEST(Properties, GatherBackwardIsIndicatorWithAccumulation) {
  Tape tape;
  Var src = tape.leaf(Tensor(Shape{6}, 0.5));
  Var y = sum(gather(src, make_index({1, 4, 4, 0})));
  EXPECT_EQ(gradient(y, src), Tensor::vector({1, 1, 0, 0, 2, 0}));
}

TEST(Properties, GradientIsLinearInTheOutput) {
  std::mt19937_64 rng(11);
  const double a = 0.75, b = -2.5;
  Tape tape;
  Var x = tape.leaf(random_tensor({5}, rng));
  Var f = sum(sin(x));
  Var g = sum(pow(x, 2.0));
  const Tensor gf = gradient(f, x), gg = gradient(g, x);
  const Tensor combined = gradient(add(scale(f, a), scale(g, b)), x);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_DOUBLE_EQ(combined[i], a * gf[i] + b * gg[i]);
}
