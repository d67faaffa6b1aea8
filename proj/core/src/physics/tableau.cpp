#include "ensers/physics/tableau.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "ensers/error.hpp"

namespace ensers {
namespace {

// Gauss-Legendre nodes and weights on [-1, 1] (exact for degree 2n - 1).
void gauss_legendre(std::size_t n, std::vector<double>& x, std::vector<double>& w) {
  x.assign(n, 0.0);
  w.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double z = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) / (static_cast<double>(n) + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = z;
      for (std::size_t k = 2; k <= n; ++k) {
        const double pk = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / static_cast<double>(k);
        p0 = p1;
        p1 = pk;
      }
      dp = static_cast<double>(n) * (z * p1 - p0) / (z * z - 1.0);
      const double step = p1 / dp;
      z -= step;
      if (std::abs(step) < 1e-16) break;
    }
    x[i] = z;
    w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
  }
}

double lagrange(const std::vector<double>& c, std::size_t j, double s) {
  double v = 1.0;
  for (std::size_t m = 0; m < c.size(); ++m) {
    if (m != j) v *= (s - c[m]) / (c[j] - c[m]);
  }
  return v;
}

}  // namespace

ButcherTableau collocation_tableau(std::size_t q) {
  if (q == 0) throw ConfigError("collocation tableau needs at least one stage");
  if (q > 12) throw ConfigError("collocation tableau with " + std::to_string(q) + " stages is ill-conditioned (max 12)");
  ButcherTableau t;
  t.q = q;
  for (std::size_t i = 1; i <= q; ++i) t.c.push_back(static_cast<double>(i) / static_cast<double>(q + 1));
  t.a.assign(q * q, 0.0);
  t.b.assign(q, 0.0);
  std::vector<double> gx, gw;
  gauss_legendre(q / 2 + 1, gx, gw);
  auto integrate = [&](std::size_t j, double upper) {
    double acc = 0.0;
    for (std::size_t k = 0; k < gx.size(); ++k) acc += gw[k] * lagrange(t.c, j, 0.5 * upper * (gx[k] + 1.0));
    return 0.5 * upper * acc;
  };
  for (std::size_t j = 0; j < q; ++j) {
    for (std::size_t i = 0; i < q; ++i) t.a[i * q + j] = integrate(j, t.c[i]);
    t.b[j] = integrate(j, 1.0);
  }
  return t;
}

}  // namespace ensers
