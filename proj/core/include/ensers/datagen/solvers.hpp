#pragma once

#include <array>
#include <cstdint>
#include <functional>

#include "ensers/datagen/snapshot.hpp"

namespace ensers {

/// Periodic grid over [0, 1)^2 with n points per side.
Grid burgers_grid(std::size_t n);

/// Random Fourier initial velocity (2, omega): for each component
/// w = sum_{i,j=-4..4} a_ij sin(2 pi (i x + j y)) + b_ij cos(2 pi (i x + j y)),
/// a, b ~ N(0, 1), then 2 w / max|w| + c with c ~ U(-1, 1). The drawn offsets
/// c are written to offsets when given.
Tensor burgers_ic(const Grid& grid, std::uint64_t seed, std::array<double, 2>* offsets = nullptr);

struct BurgersRun {
  double nu = 0.01;
  double dt = 0.001;
  std::size_t steps = 245;
  std::size_t output_every = 5;
};

/// Explicit RK4 with the fourth-order stencils of the physics module.
/// Snapshots are t = 0 and every output_every steps.
SnapshotSet solve_burgers(const Tensor& ic, const Grid& grid, const BurgersRun& run, std::uint64_t seed = 0);

/// Periodic grid over [-1, 1) with nx points.
Grid allen_cahn_grid(std::size_t nx);
/// u(0, x) = x^2 cos(pi x).
Tensor allen_cahn_ic(const Grid& grid);

struct AllenCahnRun {
  double dt = 1e-4;
  std::size_t steps = 9800;
  std::size_t output_every = 200;
};

/// Semi-implicit Euler: diffusion implicit (FFT solve with the symbol of the
/// fourth-order finite-difference Laplacian), reaction explicit, written in
/// increment form so equilibria are preserved exactly.
SnapshotSet solve_allen_cahn(const Tensor& ic, const Grid& grid, const AllenCahnRun& run);

/// Periodic grid over [0, 2 pi)^2 with n points per side.
Grid conv_diff_grid(std::size_t n);

/// u0 = sum_{|k|,|l| <= modes} lambda cos(kx + ly) + g sin(kx + ly) with
/// lambda, g ~ N(0, sigma^2).
Tensor conv_diff_ic(const Grid& grid, std::uint64_t seed, std::size_t modes = 9, double sigma = 0.02);

struct ConvDiffCoefficients {
  std::function<double(double, double)> a = conv_diff_a;
  std::function<double(double, double)> b = conv_diff_b;
  double c = kConvDiffC;
  double d = kConvDiffD;
};

struct ConvDiffRun {
  double dt = 0.0025;
  std::size_t steps = 156;
  std::size_t output_every = 4;
  ConvDiffCoefficients coeff;
};

/// Pseudo-spectral derivatives (2/3 dealiasing of the state) with RK4.
SnapshotSet solve_conv_diff(const Tensor& ic, const Grid& grid, const ConvDiffRun& run, std::uint64_t seed = 0);

/// Non-physical travelling vortex street (u, v, p) on a non-periodic grid:
/// alternating Lamb-Oseen vortices advected by a uniform stream. Exercises the
/// three-variable pipeline only.
SnapshotSet vortex_street(std::size_t nx, std::size_t ny, std::size_t steps, double dt_output, std::uint64_t seed);

}  // namespace ensers
