#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "ensers/autodiff/gradient.hpp"
#include "ensers/error.hpp"
#include "ensers/implicit_layer.hpp"

using namespace ensers;

namespace {

Tensor random_tensor(Shape shape, std::uint64_t seed, double scale = 1.0) {
  Tensor t(std::move(shape));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-scale, scale);
  for (double& v : t.values()) v = u(rng);
  return t;
}

DecoderNet small_net(std::uint64_t seed) {
  return DecoderNet({{8, 8, 8}, Activation::Softplus, seed}, {DecoderMode::Discrete, 2, 1, 4, 8, 0});
}

SensorBlock block(const Tensor& values, const IndexLayout& lay, std::size_t start, std::size_t gamma) {
  return {values, lay.window(start, gamma)};
}

OuterSample small_sample() {
  auto sl = sample_layout(2, 1, 2, 4, 10);
  auto dl = sample_layout(2, 1, 3, 4, 11);
  return {block(random_tensor({2, 1, 2}, 1), sl, 0, 2), block(random_tensor({2, 1, 3}, 2), dl, 0, 2), {}};
}

}  // namespace

TEST(SensorProject, PicksFirstAndLast) {
  ad::Tape tape;
  Tensor d(Shape{1, 1, 7});
  for (std::size_t i = 0; i < 7; ++i) d[i] = static_cast<double>(i);
  IndexLayout lay{1, 1, 2, 7, 0, false, {0, 6}};
  auto q = sensor_project(tape.constant(d), lay.window(0, 1), 1, 1, 2);
  EXPECT_EQ(q.value().values(), (std::vector<double>{0.0, 6.0}));
}

TEST(SensorProject, RepeatedIndexRepeatsValue) {
  ad::Tape tape;
  Tensor d(Shape{1, 1, 4}, {5, 6, 7, 8});
  IndexLayout lay{1, 1, 3, 4, 0, true, {2, 2, 1}};
  auto q = sensor_project(tape.constant(d), lay.window(0, 1), 1, 1, 3);
  EXPECT_EQ(q.value().values(), (std::vector<double>{7, 7, 6}));
}

TEST(SensorProject, GradientIsDenseLambdaTransposeOnes) {
  const std::size_t gamma = 2, M = 2, w = 6, p = 3;
  auto lay = sample_layout(gamma, M, p, w, 4, true);
  ad::Tape tape;
  auto d = tape.leaf(random_tensor({gamma, M, w}, 3));
  auto g = ad::gradient(ad::sum(sensor_project(d, lay.window(0, gamma), gamma, M, p)), d);
  for (std::size_t i = 0; i < gamma; ++i) {
    for (std::size_t m = 0; m < M; ++m) {
      // Build Lambda (p x w) explicitly and form Lambda^T 1.
      std::vector<double> col(w, 0.0);
      for (std::size_t j = 0; j < p; ++j)
        for (std::size_t r = 0; r < w; ++r) col[r] += lay.at(i, m, j) == r ? 1.0 : 0.0;
      for (std::size_t r = 0; r < w; ++r) EXPECT_EQ(g[(i * M + m) * w + r], col[r]);
    }
  }
}

TEST(Infer, ZeroStepsReturnsInitialization) {
  auto net = small_net(0);
  auto s = small_sample();
  ad::Tape tape;
  InnerConfig cfg;
  cfg.steps = 0;
  auto r = infer(net.bind(tape, false), s.sensors, cfg);
  EXPECT_EQ(r.xi.value(), Tensor(Shape{8}, 0.0));
  EXPECT_TRUE(r.trace.losses.empty());
  cfg.init = InnerInit::Gaussian;
  cfg.init_seed = 5;
  ad::Tape t2;
  auto g = infer(net.bind(t2, false), s.sensors, cfg);
  EXPECT_GT(max_abs(g.xi.value()), 0.0);
}

TEST(Infer, OneStepClosedForm) {
  // D = W2^T softplus(W1^T xi) + b2 with zero first-layer bias. At xi = 0 the
  // Jacobian is W2^T diag(1/2) W1^T and D(0) = ln2 * W2^T 1 + b2.
  auto net = DecoderNet({{2, 3, 2}, Activation::Softplus, 7}, {DecoderMode::Discrete, 1, 1, 2, 2, 0});
  for (std::size_t i = 0; i < 2; ++i) net.params()[3][i] = 0.25 * static_cast<double>(i + 1);
  const auto& w1 = net.params()[0];
  const auto& w2 = net.params()[2];
  const auto& b2 = net.params()[3];
  IndexLayout lay{1, 1, 2, 2, 0, false, {1, 0}};
  Tensor chi(Shape{1, 1, 2}, {0.7, -0.4});
  const double eta = 0.3;

  double d0[2], jac[2][2];
  for (std::size_t o = 0; o < 2; ++o) {
    d0[o] = b2[o];
    for (std::size_t h = 0; h < 3; ++h) d0[o] += std::log(2.0) * w2[h * 2 + o];
    for (std::size_t x = 0; x < 2; ++x) {
      jac[o][x] = 0.0;
      for (std::size_t h = 0; h < 3; ++h) jac[o][x] += w2[h * 2 + o] * 0.5 * w1[x * 3 + h];
    }
  }
  double expect[2] = {0.0, 0.0};
  for (std::size_t j = 0; j < 2; ++j) {
    const std::size_t r = lay.index[j];
    for (std::size_t x = 0; x < 2; ++x) expect[x] += eta * 2.0 / 2.0 * jac[r][x] * (chi[j] - d0[r]);
  }

  ad::Tape tape;
  InnerConfig cfg;
  cfg.steps = 1;
  cfg.step_size = eta;
  auto res = infer(net.bind(tape, false), {chi, lay.window(0, 1)}, cfg);
  EXPECT_NEAR(res.xi.value()[0], expect[0], 1e-14);
  EXPECT_NEAR(res.xi.value()[1], expect[1], 1e-14);
}

TEST(Infer, TraceNonIncreasingBelowCurvatureBound) {
  auto net = DecoderNet({{8, 16, 3 * 1 * 20}, Activation::Softplus, 3}, {DecoderMode::Discrete, 3, 1, 20, 8, 0});
  auto lay = sample_layout(3, 1, 12, 20, 6);
  SensorBlock s{random_tensor({3, 1, 12}, 9), lay.window(0, 3)};
  ad::ScalarFn energy = [&](ad::Tape& tape, ad::Var xi) {
    auto dec = net.bind(tape, false);
    return ad::mse(sensor_project(dec.decode(xi, nullptr), s.index, 3, 1, 12), tape.constant(s.values));
  };
  // Gershgorin bound on the Hessian over a box around the iterates.
  double bound = 0.0;
  for (std::uint64_t probe = 0; probe < 4; ++probe) {
    Tensor at = probe == 0 ? Tensor(Shape{8}, 0.0) : random_tensor({8}, 100 + probe, 0.5);
    for (std::size_t i = 0; i < 8; ++i) {
      Tensor e(Shape{8}, 0.0);
      e[i] = 1.0;
      Tensor row = ad::hessian_vector(energy, at, e);
      double sum = 0.0;
      for (double v : row.values()) sum += std::abs(v);
      bound = std::max(bound, sum);
    }
  }
  ad::Tape tape;
  InnerConfig cfg;
  cfg.steps = 30;
  cfg.step_size = 0.5 / bound;
  auto r = infer(net.bind(tape, false), s, cfg);
  for (std::size_t i = 1; i < r.trace.losses.size(); ++i) EXPECT_LE(r.trace.losses[i], r.trace.losses[i - 1]);
  EXPECT_LT(r.trace.losses.back(), r.trace.losses.front());
}

TEST(Infer, PureAndDoesNotTouchParameters) {
  auto net = small_net(1);
  auto before = net.params();
  auto s = small_sample();
  InnerConfig cfg;
  cfg.steps = 5;
  cfg.loss = InnerLoss::Huber;
  ad::Tape t1, t2;
  auto a = infer(net.bind(t1, false), s.sensors, cfg);
  auto b = infer(net.bind(t2, false), s.sensors, cfg);
  EXPECT_EQ(a.xi.value(), b.xi.value());
  EXPECT_EQ(a.trace.losses, b.trace.losses);
  EXPECT_EQ(net.params(), before);
}

TEST(Infer, AcceptsAnySensorCount) {
  auto net = small_net(2);
  for (std::size_t p : {1u, 3u, 4u}) {
    auto lay = sample_layout(2, 1, p, 4, p);
    ad::Tape tape;
    InnerConfig cfg;
    auto r = infer(net.bind(tape, false), {random_tensor({2, 1, p}, p), lay.window(0, 2)}, cfg);
    EXPECT_TRUE(r.xi.value().all_finite());
  }
}

TEST(Infer, DivergenceGuardTrips) {
  auto net = small_net(3);
  auto s = small_sample();
  ad::Tape tape;
  InnerConfig cfg;
  cfg.steps = 50;
  cfg.step_size = 1e4;
  EXPECT_THROW(infer(net.bind(tape, false), s.sensors, cfg), Error);
}

TEST(Infer, CoordinatesRequiredForContinuous) {
  DecoderNet net({{3, 4, 1}, Activation::Tanh, 0}, {DecoderMode::Continuous, 1, 1, 4, 2, 1});
  IndexLayout lay{1, 1, 1, 4, 0, false, {2}};
  ad::Tape tape;
  EXPECT_THROW(infer(net.bind(tape, false), {Tensor(Shape{1, 1, 1}, 0.5), lay.window(0, 1)}, InnerConfig{}),
               ConfigError);
}

TEST(OuterGradient, UnrolledMatchesFiniteDifferences) {
  InnerConfig cfg;
  cfg.steps = 2;
  cfg.step_size = 0.1;
  cfg.unroll = true;
  EXPECT_LT(outer_gradient_check(small_net(0), small_sample(), cfg), 1e-4);
}

TEST(OuterGradient, NoInnerStepsIsPlainBackprop) {
  InnerConfig cfg;
  cfg.steps = 0;
  cfg.unroll = true;
  EXPECT_LT(outer_gradient_check(small_net(0), small_sample(), cfg), 1e-6);
}

TEST(OuterGradient, FirstOrderDiffersFromUnrolled) {
  InnerConfig cfg;
  cfg.steps = 2;
  cfg.step_size = 0.1;
  cfg.unroll = true;
  auto full = outer_gradient(small_net(0), small_sample(), cfg);
  cfg.first_order = true;
  auto first = outer_gradient(small_net(0), small_sample(), cfg);
  double diff = 0.0;
  for (std::size_t i = 0; i < full.size(); ++i) diff = std::max(diff, std::abs(full[i] - first[i]));
  EXPECT_GT(diff, 0.0);
}
