#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ensers/decoder.hpp"
#include "ensers/harness.hpp"

namespace ensers::cli {

/// Dataset generation parameters; fields the chosen system ignores must be absent.
struct GenConfig {
  System system = System::Burgers2d;
  std::uint64_t seed = 0;
  std::size_t grid = 0;  // points per side; 0: the system default
  std::optional<double> nu, dt;
  std::optional<std::size_t> steps, output_every;
  std::size_t ny = 0;  // vortex street only
};

struct NetSection {
  DecoderMode mode = DecoderMode::Discrete;
  std::vector<std::size_t> hidden{64, 64};
  Activation activation = Activation::Softplus;
  std::size_t latent = 8;
  std::uint64_t seed = 0;
};

/// Everything a train or test run needs, validated before any compute. Paths
/// are used as given (relative to the working directory).
struct RunConfig {
  System system = System::Burgers2d;
  std::filesystem::path dataset;
  std::filesystem::path output_dir;
  std::optional<GenConfig> gen;
  NetSection net;
  TrainConfig train;
  TestConfig test;
  std::size_t checkpoint_every = 50;
  nlohmann::json raw;  // the config as given, after overrides

  DecoderNet make_net(const SnapshotSet& data) const;
};

/// Applies "a.b.c=value" overrides; value is parsed as JSON, falling back to a string.
void apply_override(nlohmann::json& j, const std::string& assignment);

/// Parses and validates; unknown keys and type errors name their key path.
RunConfig parse_run_config(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {});

/// system presets the system when the section may omit it.
GenConfig parse_gen_config(const nlohmann::json& j, const std::string& path = "gen",
                           std::optional<System> system = std::nullopt);

/// Runs the solver for the configured system.
SnapshotSet generate(const GenConfig& cfg);

}  // namespace ensers::cli
