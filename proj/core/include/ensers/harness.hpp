#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ensers/datagen/snapshot.hpp"
#include "ensers/implicit_layer.hpp"
#include "ensers/sensing.hpp"

namespace ensers {

enum class Optimizer { Gd, Adam };
Optimizer parse_optimizer(const std::string& name);
std::string to_string(Optimizer o);

struct TrainConfig {
  double eta_o = 2e-4;         // outer step size
  double eta_i0 = 0.1;         // inner step size at epoch 0
  double eta_i_slope = 0.006;  // added per epoch
  std::size_t batch = 11;      // beta
  std::size_t epochs = 2001;   // I_o
  std::size_t inner_steps = 4; // I_i
  double zeta0 = 0.005;        // physics weight at epoch 0
  double zeta_slope = 1e-4;    // added per epoch
  std::size_t sensors = 32;    // p
  std::size_t labels = 800;    // h
  std::size_t samples = 22;    // N
  std::vector<std::size_t> chunks;  // explicit training chunk indices; empty: the first N
  std::size_t gamma = 5;
  std::size_t stride = 2;      // z
  std::uint64_t seed = 0;
  Optimizer optimizer = Optimizer::Gd;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  NoiseSpec sensor_noise;      // applied to training sensor values; none by default
  bool first_order = false;
  double divergence_limit = 1e8;
  std::size_t threads = 1;     // concurrent samples within a batch
  std::size_t collocation = 0; // continuous physics points per sample; 0: every grid point

  double eta_i(std::size_t epoch) const { return eta_i0 + static_cast<double>(epoch) * eta_i_slope; }
  double zeta(std::size_t epoch) const { return zeta0 + static_cast<double>(epoch) * zeta_slope; }
  void validate() const;
};

struct TestConfig {
  double eta_i = 5.0;
  std::size_t inner_steps = 100;
  std::vector<std::size_t> sensor_counts{4, 16};
  std::vector<std::optional<double>> snr_db{std::nullopt};
  std::size_t samples = 12;        // N-hat
  std::vector<std::size_t> chunks; // explicit test chunks; empty: N-hat evenly spaced
  std::uint64_t seed = 1;
  std::size_t gamma_star = 2;
  InnerLoss loss = InnerLoss::Huber;

  void validate() const;
};

/// Per-epoch state needed to continue a run bit-for-bit.
struct TrainState {
  std::size_t epoch = 0;                    // next epoch to run
  std::vector<double> loss, data_loss, physics_loss;  // per completed epoch
  std::vector<Tensor> adam_m, adam_v;
  std::size_t adam_t = 0;
};

/// Called after every epoch with the network and state; return false to stop.
using EpochCallback = std::function<bool(const DecoderNet&, const TrainState&)>;

/// Coordinates (omega, d) of the grid points, in the grid's own units.
Tensor grid_coords(const Grid& grid);

/// Sensor and label placement for a training run.
struct TrainLayouts {
  IndexLayout sensors;
  IndexLayout labels;
};
TrainLayouts make_train_layouts(const SnapshotSet& data, const TrainConfig& cfg);

/// Training chunk indices implied by the config.
std::vector<std::size_t> train_chunk_indices(const SnapshotSet& data, const TrainConfig& cfg);

/// Y = labels of a decoded block; as sensor_project with the data layout.
ad::Var label_project(ad::Var d, const IndexLayout& labels, std::size_t start, std::size_t gamma);

/// Runs (or resumes) training. The network is updated in place.
void train(DecoderNet& net, const SnapshotSet& data, const TrainLayouts& layouts, const TrainConfig& cfg,
           TrainState& state, const EpochCallback& on_epoch = {});

/// Inference then decoding on a fresh tape, without unrolling.
/// infer_coords are used for the inner loop, eval_coords for the returned
/// prediction (continuous decoders; both ignored in discrete mode).
Tensor predict(const DecoderNet& net, const SensorBlock& sensors, const InnerConfig& cfg,
               const Tensor* infer_coords = nullptr, const Tensor* eval_coords = nullptr);

/// ||d - j|| / ||j||.
double relative_error(std::span<const double> d, std::span<const double> j);

struct SampleError {
  std::size_t k = 0;
  std::size_t m = 0;
  std::size_t p = 0;
  std::optional<double> snr_db;
  double eps = 0.0;       // NaN when inference failed
  double baseline = 0.0;  // error of the training-mean predictor on the same state
};

struct ErrorReport {
  std::vector<SampleError> rows;

  /// Summary per (m, p, snr) cell plus overall means.
  nlohmann::json summary() const;
  /// Mean eps over rows matching p (and snr when given), finite rows only.
  double mean_eps(std::size_t p, std::optional<std::optional<double>> snr = std::nullopt) const;
  double mean_baseline(std::size_t p) const;
  std::size_t failures() const;
};

/// Temporal mean of the training windows, (M, omega).
Tensor baseline_field(const SnapshotSet& data, const std::vector<std::size_t>& train_chunks, std::size_t gamma,
                      std::size_t stride);

/// Test chunk indices implied by the config.
std::vector<std::size_t> test_chunk_indices(const SnapshotSet& data, const TestConfig& cfg, std::size_t gamma,
                                            std::size_t stride);

/// Evaluates every (p, snr) cell with fresh sensor layouts.
ErrorReport test(const DecoderNet& net, const SnapshotSet& data, const TestConfig& cfg, std::size_t stride,
                 const Tensor& baseline);

/// CSV (k,m,p,snr_db,eps,baseline) and JSON summary side by side.
void write_report(const ErrorReport& report, const std::filesystem::path& csv, const std::filesystem::path& json);
ErrorReport read_report_csv(const std::filesystem::path& csv);
/// Plain-text table, one row per (m, p, snr) cell.
std::string format_summary(const nlohmann::json& summary);

/// Checkpoint plus training state (epoch, histories, optimizer moments).
void save_training(const std::filesystem::path& path, const DecoderNet& net, const TrainState& state,
                   const nlohmann::json& extra = nlohmann::json::object());
DecoderNet load_training(const std::filesystem::path& path, TrainState& state, nlohmann::json* extra = nullptr);

}  // namespace ensers
