#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <numbers>

#include "ensers/datagen/solvers.hpp"
#include "ensers/error.hpp"
#include "ensers/io.hpp"

using namespace ensers;

namespace {

double mean_of(const Tensor& z, std::size_t l, std::size_t m) {
  const std::size_t w = z.dim(2);
  double s = 0.0;
  for (std::size_t r = 0; r < w; ++r) s += z[(l * z.dim(1) + m) * w + r];
  return s / static_cast<double>(w);
}

double norm_of(const Tensor& z, std::size_t l) {
  const std::size_t n = z.dim(1) * z.dim(2);
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += z[l * n + i] * z[l * n + i];
  return std::sqrt(s);
}

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("ensers_test_" + name);
}

}  // namespace

TEST(BurgersIc, NormalizedAroundOffset) {
  auto g = burgers_grid(32);
  std::array<double, 2> c{};
  auto u = burgers_ic(g, 3, &c);
  for (std::size_t m = 0; m < 2; ++m) {
    double dev = 0.0;
    for (std::size_t r = 0; r < g.points(); ++r) dev = std::max(dev, std::abs(u[m * g.points() + r] - c[m]));
    EXPECT_NEAR(dev, 2.0, 1e-14);
    EXPECT_LE(std::abs(c[m]), 1.0);
  }
}

TEST(BurgersIc, PeriodicAcrossTheDomain) {
  // Closed grid including x = 1 and y = 1.
  const std::size_t n = 17;
  Grid closed{n, n, 1.0 / (n - 1), 1.0 / (n - 1), 0.0, 0.0, false};
  auto u = burgers_ic(closed, 9);
  for (std::size_t m = 0; m < 2; ++m)
    for (std::size_t iy = 0; iy < n; ++iy) {
      EXPECT_NEAR(u[m * n * n + iy * n], u[m * n * n + iy * n + n - 1], 1e-12);
      EXPECT_NEAR(u[m * n * n + iy], u[m * n * n + (n - 1) * n + iy], 1e-12);
    }
}

TEST(BurgersIc, DeterministicPerSeed) {
  auto g = burgers_grid(16);
  EXPECT_EQ(burgers_ic(g, 4), burgers_ic(g, 4));
  EXPECT_NE(burgers_ic(g, 4), burgers_ic(g, 5));
}

TEST(SolveBurgers, ConstantStateIsSteady) {
  auto g = burgers_grid(16);
  Tensor ic(Shape{2, g.points()});
  for (std::size_t r = 0; r < g.points(); ++r) {
    ic[r] = 0.3;
    ic[g.points() + r] = -0.2;
  }
  auto s = solve_burgers(ic, g, {0.01, 0.001, 100, 10});
  double drift = 0.0;
  for (std::size_t l = 0; l < s.steps(); ++l)
    for (std::size_t i = 0; i < ic.size(); ++i) drift = std::max(drift, std::abs(s.z[l * ic.size() + i] - ic[i]));
  EXPECT_LT(drift, 1e-12);
}

TEST(SolveBurgers, ViscousEnergyDecays) {
  auto g = burgers_grid(32);
  auto ic = burgers_ic(g, 1);
  for (std::size_t m = 0; m < 2; ++m) {
    double mean = 0.0;
    for (std::size_t r = 0; r < g.points(); ++r) mean += ic[m * g.points() + r];
    mean /= static_cast<double>(g.points());
    for (std::size_t r = 0; r < g.points(); ++r) ic[m * g.points() + r] -= mean;
  }
  auto s = solve_burgers(ic, g, {1.0, 1e-4, 200, 10});
  for (std::size_t l = 1; l < s.steps(); ++l) EXPECT_LT(norm_of(s.z, l), norm_of(s.z, l - 1));
}

TEST(SolveBurgers, MeanDriftMatchesIntegratedRhs) {
  // The advective form does not conserve the mean (v u_y has non-zero mean),
  // so the drift is compared with the time integral of mean(F) instead.
  auto g = burgers_grid(32);
  const RhsSpec spec{System::Burgers2d, 0.01, 1.0};
  auto s = solve_burgers(burgers_ic(g, 0), g, {0.01, 0.001, 100, 1});
  std::vector<Tensor> f;
  for (std::size_t l = 0; l < s.steps(); ++l) f.push_back(rhs_eval(spec, s.window(l, 1).reshaped({2, g.points()}), g));
  for (std::size_t m = 0; m < 2; ++m) {
    double integral = 0.0;
    for (std::size_t l = 0; l + 1 < s.steps(); ++l) {
      double a = 0.0, b = 0.0;
      for (std::size_t r = 0; r < g.points(); ++r) {
        a += f[l][m * g.points() + r];
        b += f[l + 1][m * g.points() + r];
      }
      integral += 0.5 * s.dt_output * (a + b) / static_cast<double>(g.points());
    }
    const double drift = mean_of(s.z, s.steps() - 1, m) - mean_of(s.z, 0, m);
    EXPECT_NEAR(drift, integral, 1e-6 + 1e-3 * std::abs(drift));
    // Regression bound frozen from the seed-0 reference run (|drift| ~ 0.046 and 0.028).
    EXPECT_LT(std::abs(drift), 0.05);
  }
}

TEST(SolveBurgers, CflViolationRejected) {
  auto g = burgers_grid(32);
  EXPECT_THROW(solve_burgers(burgers_ic(g, 0), g, {0.01, 0.05, 10, 1}), ConfigError);
}

TEST(SolveBurgers, DeskRunPassesResidualCheck) {
  auto g = burgers_grid(32);
  auto s = solve_burgers(burgers_ic(g, 0), g, {0.01, 0.001, 245, 5}, 0);
  EXPECT_EQ(s.steps(), 50u);
  EXPECT_DOUBLE_EQ(s.dt_output, 0.005);
  EXPECT_LT(snapshot_residual(s, 5, {System::Burgers2d, 0.01, 1.0}), 1e-2);
  EXPECT_EQ(s.z, solve_burgers(burgers_ic(g, 0), g, {0.01, 0.001, 245, 5}, 0).z);
}

TEST(SolveAllenCahn, EquilibriaPreservedExactly) {
  auto g = allen_cahn_grid(128);
  for (double k : {1.0, 0.0, -1.0}) {
    auto s = solve_allen_cahn(Tensor(Shape{1, 128}, k), g, {1e-4, 400, 100});
    for (double v : s.z.values()) EXPECT_EQ(v, k);
  }
}

TEST(SolveAllenCahn, ReferenceRunBoundedAndConsistent) {
  auto g = allen_cahn_grid(128);
  auto s = solve_allen_cahn(allen_cahn_ic(g), g, {1e-4, 10000, 200});
  EXPECT_EQ(s.steps(), 51u);
  for (double v : s.z.values()) {
    EXPECT_LE(v, 1.05);
    EXPECT_GE(v, -1.05);
  }
  EXPECT_LT(snapshot_residual(s, 5, {System::AllenCahn, 0.0, 1.0}), 1e-2);
}

TEST(SolveConvDiff, HeatModeDecay) {
  auto g = conv_diff_grid(32);
  Tensor ic(Shape{1, g.points()});
  for (std::size_t r = 0; r < g.points(); ++r) ic[r] = std::cos(g.x(r));
  ConvDiffRun run{0.0025, 80, 8, {[](double, double) { return 0.0; }, [](double, double) { return 0.0; }, 0.2, 0.2}};
  auto s = solve_conv_diff(ic, g, run);
  const std::size_t last = s.steps() - 1;
  double err = 0.0, ref = 0.0;
  for (std::size_t r = 0; r < g.points(); ++r) {
    const double exact = std::exp(-0.2 * 0.2) * std::cos(g.x(r));
    err += std::pow(s.z[last * g.points() + r] - exact, 2);
    ref += exact * exact;
  }
  EXPECT_LT(std::sqrt(err / ref), 1e-6);
}

TEST(SolveConvDiff, ZeroStaysZeroAndMeanConserved) {
  auto g = conv_diff_grid(32);
  auto zero = solve_conv_diff(Tensor(Shape{1, g.points()}, 0.0), g, {0.0025, 20, 4, {}});
  EXPECT_EQ(max_abs(zero.z), 0.0);
  ConvDiffRun diffusion{0.0025, 40, 4, {[](double, double) { return 0.0; }, [](double, double) { return 0.0; }, 0.2, 0.3}};
  auto s = solve_conv_diff(conv_diff_ic(g, 2), g, diffusion);
  const double m0 = mean_of(s.z, 0, 0);
  for (std::size_t l = 1; l < s.steps(); ++l) EXPECT_NEAR(mean_of(s.z, l, 0), m0, 1e-12);
}

TEST(SolveConvDiff, DeskRunPassesResidualCheck) {
  auto g = conv_diff_grid(64);
  auto s = solve_conv_diff(conv_diff_ic(g, 0), g, {0.0025, 156, 4, {}});
  EXPECT_EQ(s.steps(), 40u);
  EXPECT_LT(snapshot_residual(s, 5, {System::ConvDiff, 0.0, 1.0}), 1e-2);
}

TEST(Snapshots, RoundTripIsBitIdentical) {
  auto s = vortex_street(12, 10, 6, 0.1, 3);
  const auto path = temp_path("snap.bin");
  save_snapshots(path, s);
  auto back = load_snapshots(path);
  EXPECT_EQ(back.z, s.z);
  EXPECT_EQ(back.system, System::NavierStokes2d);
  EXPECT_FALSE(back.grid.periodic);
  EXPECT_EQ(back.grid.nx, 12u);
  std::filesystem::remove(path);
}

TEST(Snapshots, TruncatedFileRejected) {
  auto g = burgers_grid(8);
  SnapshotSet s{System::Burgers2d, Tensor(Shape{3, 2, 64}, 0.5), g, 0.01, 0, {}};
  const auto path = temp_path("trunc.bin");
  save_snapshots(path, s);
  std::filesystem::resize_file(path, std::filesystem::file_size(path) - 3);
  EXPECT_THROW(load_snapshots(path), IoError);
  std::filesystem::remove(path);
}

TEST(Snapshots, HeaderPayloadMismatchRejected) {
  auto g = burgers_grid(8);
  io::json h{{"kind", "ensers-snapshots"}, {"system", "burgers2d"}, {"L", 4}, {"M", 2}, {"omega", 64},
             {"grid", grid_to_json(g)}, {"dt_output", 0.01}, {"seed", 0}};
  std::vector<double> payload(3 * 2 * 64, 0.0);
  const auto path = temp_path("mismatch.bin");
  io::write_blob(path, h, payload);
  EXPECT_THROW(load_snapshots(path), IoError);
  std::filesystem::remove(path);
}

TEST(Snapshots, NonFinitePayloadRejected) {
  auto g = burgers_grid(8);
  io::json h{{"kind", "ensers-snapshots"}, {"system", "burgers2d"}, {"L", 1}, {"M", 2}, {"omega", 64},
             {"grid", grid_to_json(g)}, {"dt_output", 0.01}, {"seed", 0}};
  std::vector<double> payload(2 * 64, 0.0);
  payload[5] = std::nan("");
  const auto path = temp_path("nan.bin");
  io::write_blob(path, h, payload);
  EXPECT_THROW(load_snapshots(path), IoError);
  std::filesystem::remove(path);
}

TEST(VortexStreet, ShapesAndDeterminism) {
  auto a = vortex_street(64, 64, 8, 0.2, 1);
  EXPECT_EQ(a.z.shape(), (Shape{8, 3, 4096}));
  EXPECT_EQ(a.z, vortex_street(64, 64, 8, 0.2, 1).z);
}
