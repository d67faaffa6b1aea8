#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "ensers/autodiff/kernels.hpp"
#include "ensers/datagen/noise.hpp"
#include "ensers/tensor.hpp"

namespace ensers {

using ad::IndexList;
using ad::make_index;

/// Per-(timestep, variable) index sets into the spatial grid. Used for both
/// sensor locations and label locations.
struct IndexLayout {
  std::size_t steps = 0;      // L
  std::size_t variables = 0;  // M
  std::size_t count = 0;      // p or h
  std::size_t points = 0;     // omega
  std::uint64_t seed = 0;
  bool with_replacement = false;
  std::vector<std::size_t> index;  // steps x variables x count, row-major

  std::size_t at(std::size_t l, std::size_t m, std::size_t j) const { return index[(l * variables + m) * count + j]; }

  /// Flat indices into a (gamma, M, omega) block for timesteps start..start+gamma-1,
  /// ordered (i, m, j) so a gather yields a (gamma, M, count) block.
  IndexList window(std::size_t start, std::size_t gamma) const;
  /// Same indices restricted to a single spatial grid of width omega_eval
  /// (the block being gathered from has shape (gamma, M, omega_eval)).
  IndexList window(std::size_t start, std::size_t gamma, std::size_t omega_eval) const;
};

using SensorLayout = IndexLayout;
using DataLayout = IndexLayout;

/// Independent uniform draws per (l, m), deterministic per seed.
IndexLayout sample_layout(std::size_t steps, std::size_t variables, std::size_t count, std::size_t points,
                          std::uint64_t seed, bool with_replacement = false);

/// Layout where every (l, m) observes the full grid in order.
IndexLayout full_layout(std::size_t steps, std::size_t variables, std::size_t points);

void save_layout(const std::filesystem::path& path, const IndexLayout& layout);
IndexLayout load_layout(const std::filesystem::path& path);

/// Gathers Z (L, M, omega) at the layout, then applies noise: (L, M, count).
Tensor measure(const Tensor& z, const IndexLayout& layout, const NoiseSpec& noise = {});

/// A sample of gamma consecutive states starting at timestep start = k * z.
struct Chunk {
  std::size_t k = 0;
  std::size_t start = 0;
  Tensor chi;  // (gamma, M, p)
  Tensor phi;  // (gamma, M, h)
};

std::size_t chunk_count(std::size_t steps, std::size_t gamma, std::size_t stride);

/// Splits sensor values (L, M, p) and label values (L, M, h) into windows.
std::vector<Chunk> chunk(const Tensor& sensors, const Tensor& labels, std::size_t gamma, std::size_t stride);

/// Rows [start, start + gamma) of an (L, ...) tensor.
Tensor time_window(const Tensor& t, std::size_t start, std::size_t gamma);

}  // namespace ensers
