#pragma once

#include <cstddef>
#include <memory>
#include <string>

#include "ensers/autodiff/ops.hpp"

namespace ensers {

/// Uniform grid. Fields are stored row-major as (ny, nx): index r = iy * nx + ix,
/// x = x0 + ix * dx, y = y0 + iy * dy. One-dimensional grids have ny = 1.
struct Grid {
  std::size_t nx = 0;
  std::size_t ny = 1;
  double dx = 1.0;
  double dy = 1.0;
  double x0 = 0.0;
  double y0 = 0.0;
  bool periodic = true;

  std::size_t points() const { return nx * ny; }
  bool two_d() const { return ny > 1; }
  double x(std::size_t r) const { return x0 + static_cast<double>(r % nx) * dx; }
  double y(std::size_t r) const { return y0 + static_cast<double>(r / nx) * dy; }
  /// Points on which residuals are evaluated: the whole grid when periodic,
  /// otherwise the interior two cells in from each edge.
  std::size_t residual_points() const;
};

/// Fourth-order 5x5 stencils. E_x is the smoothed difference [1,-8,0,8,-1]
/// weighted by [1,2,3,2,1] across rows, scaled 1/(9*12*dx); E_y is its
/// transpose scaled 1/(9*12*dy). The Laplacian is the 5x5 cross with centre -60
/// ([-1,16,-30,16,-1] per axis) scaled 1/(12 dx^2) along x and 1/(12 dy^2) along y.
struct StencilSet {
  std::shared_ptr<const ad::Stencil5> ex, ey, lap, lap_x, lap_y, crop;
  double dx = 1.0, dy = 1.0;

  static StencilSet make(double dx, double dy);
};

ad::Var stencil_dx(ad::Var field, const StencilSet& s, bool periodic);
ad::Var stencil_dy(ad::Var field, const StencilSet& s, bool periodic);
ad::Var stencil_lap(ad::Var field, const StencilSet& s, bool periodic);
/// Identity when periodic; otherwise the (H-4) x (W-4) interior.
ad::Var stencil_crop(ad::Var field, const StencilSet& s, bool periodic);

Tensor stencil_dx(const Tensor& field, const StencilSet& s, bool periodic);
Tensor stencil_dy(const Tensor& field, const StencilSet& s, bool periodic);
Tensor stencil_lap(const Tensor& field, const StencilSet& s, bool periodic);

}  // namespace ensers
