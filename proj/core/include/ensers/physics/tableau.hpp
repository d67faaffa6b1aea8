#pragma once

#include <cstddef>
#include <vector>

namespace ensers {

/// Coefficients {a_ij, b_j, c_j} of a q-stage Runge-Kutta scheme.
struct ButcherTableau {
  std::size_t q = 0;
  std::vector<double> a;  // q x q, row-major
  std::vector<double> b;
  std::vector<double> c;

  double at(std::size_t i, std::size_t j) const { return a[i * q + j]; }
};

/// Collocation on the equispaced nodes c_i = i / (q + 1), i = 1..q:
/// a_ij = int_0^{c_i} l_j, b_j = int_0^1 l_j with l_j the Lagrange basis.
/// Throws for q = 0 or q > 12.
ButcherTableau collocation_tableau(std::size_t q);

}  // namespace ensers
