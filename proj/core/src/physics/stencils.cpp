#include "ensers/physics/stencils.hpp"

#include "ensers/error.hpp"

namespace ensers {
namespace {

constexpr double kDiff[5] = {1.0, -8.0, 0.0, 8.0, -1.0};
constexpr double kSmooth[5] = {1.0, 2.0, 3.0, 2.0, 1.0};
// One axis of the cross; the two axes together give the -60 centre.
constexpr double kLap[5] = {-1.0, 16.0, -30.0, 16.0, -1.0};

void require_stencil_size(const Tensor& field, const char* op) {
  if (field.rank() != 2 || field.dim(0) < 5 || field.dim(1) < 5) {
    throw ShapeError(std::string(op) + ": field " + to_string(field.shape()) + " smaller than the 5x5 stencil");
  }
}

}  // namespace

std::size_t Grid::residual_points() const {
  if (periodic) return points();
  if (nx < 5 || ny < 5) throw ShapeError("grid too small for interior residuals");
  return (nx - 4) * (ny - 4);
}

StencilSet StencilSet::make(double dx, double dy) {
  if (!(dx > 0.0) || !(dy > 0.0)) throw ConfigError("stencil spacings must be positive");
  ad::Stencil5 ex{}, ey{}, lap{}, lap_x{}, lap_y{}, crop{};
  for (std::size_t r = 0; r < 5; ++r) {
    for (std::size_t c = 0; c < 5; ++c) {
      ex[r * 5 + c] = kSmooth[r] * kDiff[c] / (9.0 * 12.0 * dx);
      ey[r * 5 + c] = kDiff[r] * kSmooth[c] / (9.0 * 12.0 * dy);
    }
    lap[2 * 5 + r] += kLap[r] / (12.0 * dx * dx);
    lap[r * 5 + 2] += kLap[r] / (12.0 * dy * dy);
    lap_x[2 * 5 + r] = kLap[r] / (12.0 * dx * dx);
    lap_y[r * 5 + 2] = kLap[r] / (12.0 * dy * dy);
  }
  crop[2 * 5 + 2] = 1.0;
  StencilSet s;
  s.ex = std::make_shared<const ad::Stencil5>(ex);
  s.ey = std::make_shared<const ad::Stencil5>(ey);
  s.lap = std::make_shared<const ad::Stencil5>(lap);
  s.lap_x = std::make_shared<const ad::Stencil5>(lap_x);
  s.lap_y = std::make_shared<const ad::Stencil5>(lap_y);
  s.crop = std::make_shared<const ad::Stencil5>(crop);
  s.dx = dx;
  s.dy = dy;
  return s;
}

ad::Var stencil_dx(ad::Var field, const StencilSet& s, bool periodic) {
  require_stencil_size(field.value(), "stencil_dx");
  return ad::stencil(field, s.ex, periodic);
}

ad::Var stencil_dy(ad::Var field, const StencilSet& s, bool periodic) {
  require_stencil_size(field.value(), "stencil_dy");
  return ad::stencil(field, s.ey, periodic);
}

ad::Var stencil_lap(ad::Var field, const StencilSet& s, bool periodic) {
  require_stencil_size(field.value(), "stencil_lap");
  return ad::stencil(field, s.lap, periodic);
}

ad::Var stencil_crop(ad::Var field, const StencilSet& s, bool periodic) {
  return periodic ? field : ad::stencil(field, s.crop, false);
}

Tensor stencil_dx(const Tensor& field, const StencilSet& s, bool periodic) {
  require_stencil_size(field, "stencil_dx");
  return ad::stencil(field, *s.ex, periodic);
}

Tensor stencil_dy(const Tensor& field, const StencilSet& s, bool periodic) {
  require_stencil_size(field, "stencil_dy");
  return ad::stencil(field, *s.ey, periodic);
}

Tensor stencil_lap(const Tensor& field, const StencilSet& s, bool periodic) {
  require_stencil_size(field, "stencil_lap");
  return ad::stencil(field, *s.lap, periodic);
}

}  // namespace ensers
