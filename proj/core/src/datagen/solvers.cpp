#include "ensers/datagen/solvers.hpp"

#include <fftw3.h>

#include <cmath>
#include <complex>
#include <numbers>
#include <random>

#include "ensers/error.hpp"

namespace ensers {
namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kBlowUp = 1e6;

void guard(const Tensor& u, std::size_t step, const char* solver) {
  for (double v : u.values()) {
    if (!std::isfinite(v) || std::abs(v) > kBlowUp) {
      throw DivergenceError(std::string(solver) + ": solution blew up at step " + std::to_string(step));
    }
  }
}

// y = x + s * d
Tensor axpy(const Tensor& x, double s, const Tensor& d) {
  Tensor y = x;
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += s * d[i];
  return y;
}

// Appends a snapshot to the flat output buffer.
void record(std::vector<double>& out, const Tensor& u) { out.insert(out.end(), u.values().begin(), u.values().end()); }

template <class Rhs>
Tensor rk4_step(const Tensor& u, double dt, Rhs&& f) {
  const Tensor k1 = f(u);
  const Tensor k2 = f(axpy(u, 0.5 * dt, k1));
  const Tensor k3 = f(axpy(u, 0.5 * dt, k2));
  const Tensor k4 = f(axpy(u, dt, k3));
  Tensor next = u;
  for (std::size_t i = 0; i < next.size(); ++i) next[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  return next;
}

void check_run(double dt, std::size_t steps, std::size_t every, const char* solver) {
  if (!(dt > 0.0)) throw ConfigError(std::string(solver) + ": time step must be positive");
  if (every == 0) throw ConfigError(std::string(solver) + ": output interval must be positive");
  if (steps % every != 0) {
    throw ConfigError(std::string(solver) + ": step count " + std::to_string(steps) + " is not a multiple of " +
                      std::to_string(every));
  }
}

// Wavenumber of FFT index i on n points for a period of 2 pi / scale.
double wavenumber(std::size_t i, std::size_t n, double scale) {
  const auto k = static_cast<double>(i <= n / 2 ? static_cast<std::ptrdiff_t>(i)
                                                : static_cast<std::ptrdiff_t>(i) - static_cast<std::ptrdiff_t>(n));
  return k * scale;
}

}  // namespace

Grid burgers_grid(std::size_t n) {
  const double d = 1.0 / static_cast<double>(n);
  return {n, n, d, d, 0.0, 0.0, true};
}

Tensor burgers_ic(const Grid& grid, std::uint64_t seed, std::array<double, 2>* offsets) {
  constexpr int kModes = 4;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(-1.0, 1.0);
  Tensor out(Shape{2, grid.points()});
  for (std::size_t m = 0; m < 2; ++m) {
    std::vector<double> a, b;
    for (int i = -kModes; i <= kModes; ++i) {
      for (int j = -kModes; j <= kModes; ++j) {
        a.push_back(normal(rng));
        b.push_back(normal(rng));
      }
    }
    const double c = uniform(rng);
    if (offsets != nullptr) (*offsets)[m] = c;
    std::vector<double> w(grid.points(), 0.0);
    double wmax = 0.0;
    for (std::size_t r = 0; r < grid.points(); ++r) {
      const double x = grid.x(r), y = grid.y(r);
      std::size_t n = 0;
      for (int i = -kModes; i <= kModes; ++i) {
        for (int j = -kModes; j <= kModes; ++j, ++n) {
          const double arg = 2.0 * kPi * (i * x + j * y);
          w[r] += a[n] * std::sin(arg) + b[n] * std::cos(arg);
        }
      }
      wmax = std::max(wmax, std::abs(w[r]));
    }
    for (std::size_t r = 0; r < grid.points(); ++r) out[m * grid.points() + r] = 2.0 * w[r] / wmax + c;
  }
  return out;
}

SnapshotSet solve_burgers(const Tensor& ic, const Grid& grid, const BurgersRun& run, std::uint64_t seed) {
  check_run(run.dt, run.steps, run.output_every, "solve_burgers");
  if (ic.shape() != Shape{2, grid.points()}) throw ShapeError("solve_burgers: initial state must be (2, omega)");
  if (!(run.nu >= 0.0)) throw ConfigError("solve_burgers: viscosity must be non-negative");
  const double cfl = max_abs(ic) * run.dt / std::min(grid.dx, grid.dy);
  if (!(cfl < 1.0)) {
    throw ConfigError("solve_burgers: CFL number " + std::to_string(cfl) + " >= 1 at t = 0; reduce dt");
  }
  const RhsSpec spec{System::Burgers2d, run.nu, 1.0};
  auto f = [&](const Tensor& u) { return rhs_eval(spec, u, grid); };
  std::vector<double> out;
  record(out, ic);
  Tensor u = ic;
  for (std::size_t s = 1; s <= run.steps; ++s) {
    u = rk4_step(u, run.dt, f);
    guard(u, s, "solve_burgers");
    if (s % run.output_every == 0) record(out, u);
  }
  SnapshotSet set;
  set.system = System::Burgers2d;
  const std::size_t L = run.steps / run.output_every + 1;
  set.z = Tensor(Shape{L, 2, grid.points()}, std::move(out));
  set.grid = grid;
  set.dt_output = run.dt * static_cast<double>(run.output_every);
  set.seed = seed;
  set.params = {{"nu", run.nu}, {"dt", run.dt}, {"steps", run.steps}, {"output_every", run.output_every},
                {"scheme", "rk4 + 4th-order stencils"}};
  return set;
}

Grid allen_cahn_grid(std::size_t nx) { return {nx, 1, 2.0 / static_cast<double>(nx), 1.0, -1.0, 0.0, true}; }

Tensor allen_cahn_ic(const Grid& grid) {
  Tensor u(Shape{1, grid.nx});
  for (std::size_t r = 0; r < grid.nx; ++r) {
    const double x = grid.x(r);
    u[r] = x * x * std::cos(kPi * x);
  }
  return u;
}

SnapshotSet solve_allen_cahn(const Tensor& ic, const Grid& grid, const AllenCahnRun& run) {
  check_run(run.dt, run.steps, run.output_every, "solve_allen_cahn");
  const std::size_t n = grid.nx;
  if (n < 64) throw ConfigError("solve_allen_cahn: need at least 64 grid points");
  if (grid.two_d() || !grid.periodic) throw ConfigError("solve_allen_cahn: needs a periodic 1-D grid");
  if (ic.size() != n) throw ShapeError("solve_allen_cahn: initial state must have nx values");

  const double h2 = 12.0 * grid.dx * grid.dx;
  const std::size_t nk = n / 2 + 1;
  // Implicit factor 1 / (1 - dt eps lambda_k) with lambda_k the symbol of the FD Laplacian.
  std::vector<double> inv(nk);
  for (std::size_t k = 0; k < nk; ++k) {
    const double th = 2.0 * kPi * static_cast<double>(k) / static_cast<double>(n);
    const double lambda = (-2.0 * std::cos(2.0 * th) + 32.0 * std::cos(th) - 30.0) / h2;
    inv[k] = 1.0 / (1.0 - run.dt * kAllenCahnEps * lambda) / static_cast<double>(n);
  }
  std::vector<double> buf(n);
  std::vector<std::complex<double>> spec(nk);
  auto* cbuf = reinterpret_cast<fftw_complex*>(spec.data());
  fftw_plan fwd = fftw_plan_dft_r2c_1d(static_cast<int>(n), buf.data(), cbuf, FFTW_ESTIMATE);
  fftw_plan bwd = fftw_plan_dft_c2r_1d(static_cast<int>(n), cbuf, buf.data(), FFTW_ESTIMATE);

  std::vector<double> out;
  Tensor u = ic.reshaped({1, n});
  record(out, u);
  auto wrap = [n](std::ptrdiff_t i) { return static_cast<std::size_t>((i % static_cast<std::ptrdiff_t>(n) + static_cast<std::ptrdiff_t>(n)) % static_cast<std::ptrdiff_t>(n)); };
  constexpr double kLap[5] = {-1.0, 16.0, -30.0, 16.0, -1.0};
  for (std::size_t s = 1; s <= run.steps; ++s) {
    // Increment form: (1 - dt eps L) du = dt (eps L u + R(u)).
    for (std::size_t i = 0; i < n; ++i) {
      double lap = 0.0;
      for (int k = -2; k <= 2; ++k) lap += kLap[k + 2] * (u[wrap(static_cast<std::ptrdiff_t>(i) + k)] - u[i]);
      const double v = u[i];
      buf[i] = run.dt * (kAllenCahnEps * lap / h2 - kAllenCahnK * (v * v * v - v));
    }
    fftw_execute(fwd);
    for (std::size_t k = 0; k < nk; ++k) spec[k] *= inv[k];
    fftw_execute(bwd);
    for (std::size_t i = 0; i < n; ++i) u[i] += buf[i];
    guard(u, s, "solve_allen_cahn");
    if (s % run.output_every == 0) record(out, u);
  }
  fftw_destroy_plan(fwd);
  fftw_destroy_plan(bwd);

  SnapshotSet set;
  set.system = System::AllenCahn;
  const std::size_t L = run.steps / run.output_every + 1;
  set.z = Tensor(Shape{L, 1, n}, std::move(out));
  set.grid = grid;
  set.dt_output = run.dt * static_cast<double>(run.output_every);
  set.params = {{"dt", run.dt}, {"steps", run.steps}, {"output_every", run.output_every},
                {"scheme", "semi-implicit euler, fft-implicit 4th-order fd diffusion"}};
  return set;
}

Grid conv_diff_grid(std::size_t n) {
  const double d = 2.0 * kPi / static_cast<double>(n);
  return {n, n, d, d, 0.0, 0.0, true};
}

Tensor conv_diff_ic(const Grid& grid, std::uint64_t seed, std::size_t modes, double sigma) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, sigma);
  const int n = static_cast<int>(modes);
  std::vector<double> lam, gam;
  for (int k = -n; k <= n; ++k) {
    for (int l = -n; l <= n; ++l) {
      lam.push_back(normal(rng));
      gam.push_back(normal(rng));
    }
  }
  Tensor u(Shape{1, grid.points()});
  for (std::size_t r = 0; r < grid.points(); ++r) {
    const double x = grid.x(r), y = grid.y(r);
    double acc = 0.0;
    std::size_t idx = 0;
    for (int k = -n; k <= n; ++k) {
      for (int l = -n; l <= n; ++l, ++idx) {
        const double arg = k * x + l * y;
        acc += lam[idx] * std::cos(arg) + gam[idx] * std::sin(arg);
      }
    }
    u[r] = acc;
  }
  return u;
}

SnapshotSet solve_conv_diff(const Tensor& ic, const Grid& grid, const ConvDiffRun& run, std::uint64_t seed) {
  check_run(run.dt, run.steps, run.output_every, "solve_conv_diff");
  if (!grid.two_d() || !grid.periodic) throw ConfigError("solve_conv_diff: needs a periodic 2-D grid");
  if (ic.size() != grid.points()) throw ShapeError("solve_conv_diff: initial state must have omega values");
  const std::size_t nx = grid.nx, ny = grid.ny, nkx = nx / 2 + 1;
  const double sx = 2.0 * kPi / (static_cast<double>(nx) * grid.dx);
  const double sy = 2.0 * kPi / (static_cast<double>(ny) * grid.dy);
  const double kx_cut = std::floor(static_cast<double>(nx) / 3.0) * sx;
  const double ky_cut = std::floor(static_cast<double>(ny) / 3.0) * sy;
  const double norm = 1.0 / static_cast<double>(nx * ny);

  Tensor a(Shape{grid.points()}), b(Shape{grid.points()});
  for (std::size_t r = 0; r < grid.points(); ++r) {
    a[r] = run.coeff.a(grid.x(r), grid.y(r));
    b[r] = run.coeff.b(grid.x(r), grid.y(r));
  }
  std::vector<double> real(grid.points());
  std::vector<std::complex<double>> hat(ny * nkx), work(ny * nkx);
  auto* ch = reinterpret_cast<fftw_complex*>(work.data());
  fftw_plan fwd = fftw_plan_dft_r2c_2d(static_cast<int>(ny), static_cast<int>(nx), real.data(), ch, FFTW_ESTIMATE);
  fftw_plan bwd = fftw_plan_dft_c2r_2d(static_cast<int>(ny), static_cast<int>(nx), ch, real.data(), FFTW_ESTIMATE);

  // Applies a spectral multiplier to the transformed state and returns the physical field.
  auto apply = [&](auto&& multiplier) {
    for (std::size_t iy = 0; iy < ny; ++iy) {
      const double ky = wavenumber(iy, ny, sy);
      for (std::size_t ix = 0; ix < nkx; ++ix) {
        const double kx = wavenumber(ix, nx, sx);
        work[iy * nkx + ix] = hat[iy * nkx + ix] * multiplier(kx, ky) * norm;
      }
    }
    fftw_execute(bwd);
    return Tensor(Shape{grid.points()}, real);
  };
  const std::complex<double> I(0.0, 1.0);
  auto f = [&](const Tensor& u) {
    std::copy(u.values().begin(), u.values().end(), real.begin());
    fftw_execute(fwd);
    for (std::size_t i = 0; i < hat.size(); ++i) hat[i] = work[i];
    auto dealias = [&](double kx, double ky) { return std::abs(kx) < kx_cut + 1e-12 && std::abs(ky) < ky_cut + 1e-12; };
    const Tensor ux = apply([&](double kx, double ky) { return dealias(kx, ky) ? I * kx : 0.0 * I; });
    const Tensor uy = apply([&](double kx, double ky) { return dealias(kx, ky) ? I * ky : 0.0 * I; });
    const Tensor diff = apply([&](double kx, double ky) {
      return dealias(kx, ky) ? std::complex<double>(-run.coeff.c * kx * kx - run.coeff.d * ky * ky, 0.0)
                             : std::complex<double>(0.0, 0.0);
    });
    Tensor out(u.shape());
    for (std::size_t r = 0; r < out.size(); ++r) out[r] = a[r] * ux[r] + b[r] * uy[r] + diff[r];
    return out;
  };

  std::vector<double> out;
  Tensor u = ic.reshaped({grid.points()});
  record(out, u);
  for (std::size_t s = 1; s <= run.steps; ++s) {
    u = rk4_step(u, run.dt, f);
    guard(u, s, "solve_conv_diff");
    if (s % run.output_every == 0) record(out, u);
  }
  fftw_destroy_plan(fwd);
  fftw_destroy_plan(bwd);

  SnapshotSet set;
  set.system = System::ConvDiff;
  const std::size_t L = run.steps / run.output_every + 1;
  set.z = Tensor(Shape{L, 1, grid.points()}, std::move(out));
  set.grid = grid;
  set.dt_output = run.dt * static_cast<double>(run.output_every);
  set.seed = seed;
  set.params = {{"dt", run.dt}, {"steps", run.steps}, {"output_every", run.output_every},
                {"c", run.coeff.c}, {"d", run.coeff.d}, {"scheme", "pseudo-spectral rk4, 2/3 dealiased"}};
  return set;
}

SnapshotSet vortex_street(std::size_t nx, std::size_t ny, std::size_t steps, double dt_output, std::uint64_t seed) {
  if (nx < 5 || ny < 5 || steps == 0) throw ConfigError("vortex_street: grid must be at least 5x5 with steps >= 1");
  // Domain [0, 8) x [-2, 2), unit stream speed, vortices shed every 1.0 time units.
  Grid grid{nx, ny, 8.0 / static_cast<double>(nx), 4.0 / static_cast<double>(ny), 0.0, -2.0, false};
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> jitter(-0.1, 0.1);
  const double speed = 0.8, spacing = 1.0, offset = 0.35, core = 0.3, strength = 1.2;
  const double phase = jitter(rng);
  std::vector<double> out;
  out.reserve(steps * 3 * grid.points());
  for (std::size_t l = 0; l < steps; ++l) {
    const double t = static_cast<double>(l) * dt_output;
    std::vector<double> u(grid.points(), 1.0), v(grid.points(), 0.0), p(grid.points(), 0.0);
    for (int n = -2; n < 12; ++n) {
      const double xc = speed * t + spacing * (n + phase);
      const double yc = (n % 2 == 0) ? offset : -offset;
      const double g = (n % 2 == 0) ? strength : -strength;
      for (std::size_t r = 0; r < grid.points(); ++r) {
        const double dx = grid.x(r) - xc, dy = grid.y(r) - yc;
        const double r2 = dx * dx + dy * dy + 1e-12;
        const double swirl = g / (2.0 * kPi * r2) * (1.0 - std::exp(-r2 / (core * core)));
        u[r] += -swirl * dy;
        v[r] += swirl * dx;
        p[r] -= 0.5 * g * g / (4.0 * kPi * kPi) * std::exp(-r2 / (core * core)) / (core * core);
      }
    }
    out.insert(out.end(), u.begin(), u.end());
    out.insert(out.end(), v.begin(), v.end());
    out.insert(out.end(), p.begin(), p.end());
  }
  SnapshotSet set;
  set.system = System::NavierStokes2d;
  set.z = Tensor(Shape{steps, 3, grid.points()}, std::move(out));
  set.grid = grid;
  set.dt_output = dt_output;
  set.seed = seed;
  set.params = {{"generator", "synthetic vortex street (non-physical)"}};
  return set;
}

}  // namespace ensers
