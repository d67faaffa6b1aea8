#pragma once

#include <cstdint>
#include <filesystem>

#include <nlohmann/json.hpp>

#include "ensers/physics/loss.hpp"
#include "ensers/tensor.hpp"

namespace ensers {

/// A simulated trajectory Z (L, M, omega) with the metadata needed to
/// interpret it.
struct SnapshotSet {
  System system = System::Burgers2d;
  Tensor z;  // (L, M, omega), row-major (l, m, r)
  Grid grid;
  double dt_output = 0.0;
  std::uint64_t seed = 0;
  nlohmann::json params = nlohmann::json::object();  // solver parameters (nu, steps, ...)

  std::size_t steps() const { return z.dim(0); }
  std::size_t variables() const { return z.dim(1); }
  std::size_t points() const { return z.dim(2); }

  /// Throws unless shapes, grid and values are mutually consistent and finite.
  void validate() const;
  /// Rows [start, start + count) as a new tensor.
  Tensor window(std::size_t start, std::size_t count) const;
};

void save_snapshots(const std::filesystem::path& path, const SnapshotSet& set);
SnapshotSet load_snapshots(const std::filesystem::path& path);

nlohmann::json grid_to_json(const Grid& g);
Grid grid_from_json(const nlohmann::json& j);

/// Relative IRK consistency of consecutive snapshot windows: the physics loss
/// of every gamma-window (stride 1) over the summed squared norm of V^n.
double snapshot_residual(const SnapshotSet& set, std::size_t gamma, const RhsSpec& spec);

}  // namespace ensers
