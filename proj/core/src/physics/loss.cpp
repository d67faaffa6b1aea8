#include "ensers/physics/loss.hpp"

#include <cmath>
#include <numbers>

#include "ensers/autodiff/gradient.hpp"
#include "ensers/error.hpp"

namespace ensers {

System parse_system(const std::string& name) {
  if (name == "burgers2d") return System::Burgers2d;
  if (name == "navier-stokes-2d") return System::NavierStokes2d;
  if (name == "allen-cahn") return System::AllenCahn;
  if (name == "conv-diff") return System::ConvDiff;
  throw ConfigError("unknown system '" + name + "' (expected burgers2d, navier-stokes-2d, allen-cahn or conv-diff)");
}

std::string to_string(System s) {
  switch (s) {
    case System::Burgers2d: return "burgers2d";
    case System::NavierStokes2d: return "navier-stokes-2d";
    case System::AllenCahn: return "allen-cahn";
    case System::ConvDiff: return "conv-diff";
  }
  return "?";
}

std::size_t system_variables(System s) {
  switch (s) {
    case System::Burgers2d: return 2;
    case System::NavierStokes2d: return 3;
    default: return 1;
  }
}

std::size_t system_dynamic_variables(System s) { return s == System::NavierStokes2d ? 2 : system_variables(s); }

double conv_diff_a(double x, double y) {
  return 0.5 * (std::cos(y) + x * (2.0 * std::numbers::pi - x) * std::sin(x)) + 0.6;
}

double conv_diff_b(double x, double y) { return 2.0 * (std::cos(y) + std::sin(x)) + 0.8; }

namespace {

ad::Var flat(ad::Var v) { return ad::reshape(v, {v.value().size()}); }

// Variable m of a (M, omega) state as a (ny, nx) field.
ad::Var field_of(ad::Var state, std::size_t m, const Grid& grid) {
  return ad::reshape(ad::slice(state, m * grid.points(), {grid.points()}), {grid.ny, grid.nx});
}

// Coefficient field sampled at the residual points.
Tensor coefficient(const Grid& grid, double (*f)(double, double)) {
  const std::size_t off = grid.periodic ? 0 : 2;
  const std::size_t h = grid.periodic ? grid.ny : grid.ny - 4;
  const std::size_t w = grid.periodic ? grid.nx : grid.nx - 4;
  Tensor t(Shape{h * w});
  for (std::size_t iy = 0; iy < h; ++iy)
    for (std::size_t ix = 0; ix < w; ++ix) t[iy * w + ix] = f(grid.x((iy + off) * grid.nx + ix + off), grid.y((iy + off) * grid.nx + ix + off));
  return t;
}

void check_state(ad::Var state, const Grid& grid, std::size_t m, const char* op) {
  const auto& s = state.value().shape();
  if (s.size() != 2 || s[0] != m || s[1] != grid.points()) {
    throw ShapeError(std::string(op) + ": state " + to_string(s) + " does not match (" + std::to_string(m) + ", " +
                     std::to_string(grid.points()) + ")");
  }
}

// State variables restricted to residual points, one flat vector each.
FieldList cropped(ad::Var state, const Grid& grid, const StencilSet& st, std::size_t count) {
  FieldList out;
  for (std::size_t m = 0; m < count; ++m) {
    out.push_back(grid.two_d() ? flat(stencil_crop(field_of(state, m, grid), st, grid.periodic))
                               : ad::slice(state, m * grid.points(), {grid.points()}));
  }
  return out;
}

ad::Var state_of(ad::Var d, std::size_t i, std::size_t m, std::size_t omega) {
  return ad::reshape(ad::slice(d, i * m * omega, {m * omega}), {m, omega});
}

}  // namespace

FieldList rhs_fields(const RhsSpec& spec, ad::Var state, const Grid& grid, const StencilSet& st) {
  const std::size_t m = system_variables(spec.system);
  check_state(state, grid, m, "rhs_eval");
  const bool per = grid.periodic;
  switch (spec.system) {
    case System::Burgers2d:
    case System::NavierStokes2d: {
      if (!grid.two_d()) throw ConfigError("rhs_eval: " + to_string(spec.system) + " needs a 2-D grid");
      ad::Var u = field_of(state, 0, grid);
      ad::Var v = field_of(state, 1, grid);
      ad::Var uc = stencil_crop(u, st, per), vc = stencil_crop(v, st, per);
      ad::Var fu = spec.nu * stencil_lap(u, st, per) -
                   (uc * stencil_dx(u, st, per) + vc * stencil_dy(u, st, per));
      ad::Var fv = spec.nu * stencil_lap(v, st, per) -
                   (uc * stencil_dx(v, st, per) + vc * stencil_dy(v, st, per));
      if (spec.system == System::NavierStokes2d) {
        ad::Var p = field_of(state, 2, grid);
        fu = fu - (1.0 / spec.rho) * stencil_dx(p, st, per);
        fv = fv - (1.0 / spec.rho) * stencil_dy(p, st, per);
      }
      return {flat(fu), flat(fv)};
    }
    case System::ConvDiff: {
      if (!grid.two_d()) throw ConfigError("rhs_eval: conv-diff needs a 2-D grid");
      ad::Var u = field_of(state, 0, grid);
      ad::Tape& tape = state.tape();
      ad::Var a = tape.constant(coefficient(grid, conv_diff_a));
      ad::Var b = tape.constant(coefficient(grid, conv_diff_b));
      ad::Var f = a * flat(stencil_dx(u, st, per)) + b * flat(stencil_dy(u, st, per)) +
                  kConvDiffC * flat(ad::stencil(u, st.lap_x, per)) + kConvDiffD * flat(ad::stencil(u, st.lap_y, per));
      return {f};
    }
    case System::AllenCahn: {
      if (grid.two_d() || !per) throw ConfigError("rhs_eval: allen-cahn needs a periodic 1-D grid");
      if (grid.nx < 5) throw ShapeError("rhs_eval: grid smaller than the 5-point stencil");
      ad::Var u = ad::reshape(state, {grid.nx});
      // Replicated rows let the 2-D periodic stencil act along x only.
      ad::Var uxx = ad::slice(ad::stencil(ad::repeat_rows(u, 5), st.lap_x, true), 0, {grid.nx});
      ad::Var f = kAllenCahnEps * uxx - kAllenCahnK * (ad::pow(u, 3.0) - u);
      return {f};
    }
  }
  throw ConfigError("rhs_eval: unsupported system");
}

ad::Var rhs_eval(const RhsSpec& spec, ad::Var state, const Grid& grid) {
  FieldList f = rhs_fields(spec, state, grid, StencilSet::make(grid.dx, grid.dy));
  const std::size_t n = f.front().value().size();
  ad::Var out = ad::reshape(f[0], {1, n});
  for (std::size_t m = 1; m < f.size(); ++m) {
    // Stack rows by concatenating the transposed columns.
    out = ad::transpose(ad::concat_cols(ad::transpose(out), ad::reshape(f[m], {n, 1})));
  }
  return out;
}

Tensor rhs_eval(const RhsSpec& spec, const Tensor& state, const Grid& grid) {
  ad::Tape tape;
  return rhs_eval(spec, tape.constant(state), grid).value();
}

ad::Var irk_loss(const std::vector<FieldList>& states, const std::vector<FieldList>& rhs, double dt,
                 const ButcherTableau& tab) {
  const std::size_t q = tab.q;
  if (states.size() != q + 2 || rhs.size() != q) {
    throw ShapeError("irk_loss: " + std::to_string(states.size()) + " states and " + std::to_string(rhs.size()) +
                     " stage evaluations for a " + std::to_string(q) + "-stage tableau (need q+2 and q)");
  }
  const std::size_t vars = states.front().size();
  ad::Var total;
  for (std::size_t i = 0; i <= q; ++i) {
    for (std::size_t m = 0; m < vars; ++m) {
      ad::Var acc;
      for (std::size_t j = 0; j < q; ++j) {
        const double w = i < q ? tab.at(i, j) : tab.b[j];
        ad::Var term = w * rhs[j][m];
        acc = acc.valid() ? acc + term : term;
      }
      ad::Var r = states[i + 1][m] - dt * acc - states[0][m];
      ad::Var sq = ad::sum(ad::square(r));
      total = total.valid() ? total + sq : sq;
    }
  }
  return total;
}

namespace {

ad::Var irk_block(ad::Var d, double dt, const ButcherTableau& tab, const RhsSpec& spec, const Grid& grid,
                  const StencilSet& st) {
  const auto& s = d.value().shape();
  const std::size_t m = system_variables(spec.system);
  if (s.size() != 3 || s[1] != m || s[2] != grid.points()) {
    throw ShapeError("physics loss: block " + to_string(s) + " does not match (gamma, " + std::to_string(m) + ", " +
                     std::to_string(grid.points()) + ")");
  }
  const std::size_t gamma = s[0];
  if (gamma != tab.q + 2) {
    throw ConfigError("physics loss: gamma = " + std::to_string(gamma) + " but the tableau has q = " +
                      std::to_string(tab.q) + " (need gamma = q + 2)");
  }
  const std::size_t dyn = system_dynamic_variables(spec.system);
  std::vector<FieldList> states, rhs;
  for (std::size_t i = 0; i < gamma; ++i) {
    ad::Var state = state_of(d, i, m, grid.points());
    states.push_back(cropped(state, grid, st, dyn));
    if (i >= 1 && i <= tab.q) rhs.push_back(rhs_fields(spec, state, grid, st));
  }
  return irk_loss(states, rhs, dt, tab);
}

}  // namespace

ad::Var physics_loss_discrete(ad::Var d, double dt, const ButcherTableau& tab, const RhsSpec& spec,
                              const Grid& grid) {
  if (spec.system == System::NavierStokes2d) return physics_loss_flow(d, dt, tab, spec, grid);
  return irk_block(d, dt, tab, spec, grid, StencilSet::make(grid.dx, grid.dy));
}

ad::Var divergence_penalty(ad::Var d, const Grid& grid) {
  const auto& s = d.value().shape();
  if (s.size() != 3 || s[1] != 3 || s[2] != grid.points()) {
    throw ShapeError("divergence penalty: block " + to_string(s) + " is not (gamma, 3, omega)");
  }
  const StencilSet st = StencilSet::make(grid.dx, grid.dy);
  ad::Var total;
  for (std::size_t i = 0; i < s[0]; ++i) {
    ad::Var state = state_of(d, i, 3, grid.points());
    ad::Var div = stencil_dx(field_of(state, 0, grid), st, grid.periodic) +
                  stencil_dy(field_of(state, 1, grid), st, grid.periodic);
    ad::Var sq = ad::sum(ad::square(div));
    total = total.valid() ? total + sq : sq;
  }
  return total;
}

ad::Var physics_loss_flow(ad::Var d, double dt, const ButcherTableau& tab, const RhsSpec& spec,
                          const Grid& grid) {
  if (spec.system != System::NavierStokes2d) throw ConfigError("physics_loss_flow needs the navier-stokes-2d system");
  return irk_block(d, dt, tab, spec, grid, StencilSet::make(grid.dx, grid.dy)) + divergence_penalty(d, grid);
}

namespace {

// Column c of an (n, d) tensor as a flat vector.
ad::Var column(ad::Var m, std::size_t c) {
  const std::size_t n = m.value().dim(0);
  return ad::reshape(ad::slice_cols(m, c, 1), {n});
}

// F at each coordinate row for state u (length n) decoded from coords.
ad::Var point_residual(ad::Var u, ad::Var coords, System system) {
  ad::Tape& tape = u.tape();
  // Each output row depends only on its own coordinate row, so gradients of
  // the sum give pointwise derivatives.
  ad::Var grad = ad::gradient_graph(ad::sum(u), coords);
  ad::Var ux = column(grad, 0);
  ad::Var uxx = column(ad::gradient_graph(ad::sum(ux), coords), 0);
  switch (system) {
    case System::AllenCahn:
      return kAllenCahnEps * uxx - kAllenCahnK * (ad::pow(u, 3.0) - u);
    case System::ConvDiff: {
      const Tensor& xy = coords.value();
      const std::size_t n = xy.dim(0);
      Tensor a(Shape{n}), b(Shape{n});
      for (std::size_t r = 0; r < n; ++r) {
        a[r] = conv_diff_a(xy[2 * r], xy[2 * r + 1]);
        b[r] = conv_diff_b(xy[2 * r], xy[2 * r + 1]);
      }
      ad::Var uy = column(grad, 1);
      ad::Var uyy = column(ad::gradient_graph(ad::sum(uy), coords), 1);
      return tape.constant(a) * ux + tape.constant(b) * uy + kConvDiffC * uxx + kConvDiffD * uyy;
    }
    default:
      throw ConfigError("no continuous residual registered for " + to_string(system));
  }
}

void check_continuous(const BoundDecoder& dec, ad::Var coords, System system) {
  const auto& lay = dec.net().layout();
  if (lay.mode != DecoderMode::Continuous) throw ConfigError("continuous residual needs a continuous decoder");
  if (system != System::AllenCahn && system != System::ConvDiff) {
    throw ConfigError("no continuous residual registered for " + to_string(system));
  }
  const std::size_t want_d = system == System::AllenCahn ? 1 : 2;
  if (lay.coord_dim != want_d || lay.variables != 1) {
    throw ConfigError("continuous " + to_string(system) + " needs M = 1 and " + std::to_string(want_d) +
                      " coordinate columns");
  }
  if (!coords.requires_grad()) throw ConfigError("continuous residual: coordinates must be a differentiable leaf");
}

}  // namespace

std::vector<ad::Var> residual_continuous(const BoundDecoder& dec, ad::Var xi, ad::Var coords, System system) {
  check_continuous(dec, coords, system);
  const std::size_t n = coords.value().dim(0);
  ad::Var d = dec.decode_continuous(xi, coords);
  std::vector<ad::Var> out;
  for (std::size_t i = 0; i < dec.net().layout().gamma; ++i) {
    out.push_back(point_residual(ad::slice(d, i * n, {n}), coords, system));
  }
  return out;
}

ad::Var physics_loss_continuous(const BoundDecoder& dec, ad::Var xi, ad::Var coords, double dt,
                                const ButcherTableau& tab, System system) {
  check_continuous(dec, coords, system);
  const std::size_t gamma = dec.net().layout().gamma;
  if (gamma != tab.q + 2) {
    throw ConfigError("physics loss: gamma = " + std::to_string(gamma) + " but the tableau has q = " +
                      std::to_string(tab.q) + " (need gamma = q + 2)");
  }
  const std::size_t n = coords.value().dim(0);
  ad::Var d = dec.decode_continuous(xi, coords);
  std::vector<FieldList> states, rhs;
  for (std::size_t i = 0; i < gamma; ++i) {
    ad::Var u = ad::slice(d, i * n, {n});
    states.push_back({u});
    if (i >= 1 && i <= tab.q) rhs.push_back({point_residual(u, coords, system)});
  }
  return irk_loss(states, rhs, dt, tab);
}

}  // namespace ensers
