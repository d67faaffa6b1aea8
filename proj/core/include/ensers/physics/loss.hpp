#pragma once

#include <string>
#include <vector>

#include "ensers/decoder.hpp"
#include "ensers/physics/stencils.hpp"
#include "ensers/physics/tableau.hpp"

namespace ensers {

enum class System { Burgers2d, NavierStokes2d, AllenCahn, ConvDiff };

System parse_system(const std::string& name);
std::string to_string(System s);
/// Variables per state (M): u, v for Burgers; u, v, p for Navier-Stokes; u otherwise.
std::size_t system_variables(System s);
/// Variables with a time-evolution equation (pressure has none).
std::size_t system_dynamic_variables(System s);

/// Right-hand side F with J_t = F(x, J).
struct RhsSpec {
  System system = System::Burgers2d;
  double nu = 0.01;   // Burgers / Navier-Stokes viscosity
  double rho = 1.0;   // Navier-Stokes density
};

/// Convection-diffusion coefficients: u_t = a u_x + b u_y + c u_xx + d u_yy.
double conv_diff_a(double x, double y);
double conv_diff_b(double x, double y);
inline constexpr double kConvDiffC = 0.2;
inline constexpr double kConvDiffD = 0.3;
/// Allen-Cahn: u_t = kAllenCahnEps u_xx - kAllenCahnK (u^3 - u).
inline constexpr double kAllenCahnEps = 1e-4;
inline constexpr double kAllenCahnK = 5.0;

/// One entry per variable, each a flat vector over residual points.
using FieldList = std::vector<ad::Var>;

/// Stencil evaluation of F on one state (M, omega). Returns the dynamic
/// variables on Grid::residual_points().
FieldList rhs_fields(const RhsSpec& spec, ad::Var state, const Grid& grid, const StencilSet& stencils);
/// Same, stacked as (M_dynamic, residual points).
ad::Var rhs_eval(const RhsSpec& spec, ad::Var state, const Grid& grid);
Tensor rhs_eval(const RhsSpec& spec, const Tensor& state, const Grid& grid);

/// Sum over i of ||W_i - V^n||^2 with
///   W_i     = V^{n+c_i} - dt sum_j a_ij F_j,  i = 1..q
///   W_{q+1} = V^{n+1}   - dt sum_j b_j F_j
/// states holds V^n, V^{n+c_1}, ..., V^{n+c_q}, V^{n+1}; rhs holds F_1..F_q.
ad::Var irk_loss(const std::vector<FieldList>& states, const std::vector<FieldList>& rhs, double dt,
                 const ButcherTableau& tableau);

/// IRK consistency loss of a decoded block D (gamma, M, omega) with stencil
/// derivatives; gamma must equal q + 2. Navier-Stokes dispatches to
/// physics_loss_flow.
ad::Var physics_loss_discrete(ad::Var d, double dt, const ButcherTableau& tableau, const RhsSpec& spec,
                              const Grid& grid);
/// Momentum IRK loss plus sum over all states of ||u_x + v_y||^2.
ad::Var physics_loss_flow(ad::Var d, double dt, const ButcherTableau& tableau, const RhsSpec& spec,
                          const Grid& grid);
/// The continuity part of physics_loss_flow alone.
ad::Var divergence_penalty(ad::Var d, const Grid& grid);

/// F at every coordinate row for each decoded state, with coordinate
/// derivatives taken through the network. coords must be a tape leaf of
/// shape (n, d). Returns gamma vectors of length n (M = 1 systems).
std::vector<ad::Var> residual_continuous(const BoundDecoder& dec, ad::Var xi, ad::Var coords, System system);
/// IRK consistency loss for a continuous decoder over the coordinate rows.
ad::Var physics_loss_continuous(const BoundDecoder& dec, ad::Var xi, ad::Var coords, double dt,
                                const ButcherTableau& tableau, System system);

}  // namespace ensers
