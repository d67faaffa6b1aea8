#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "ensers/decoder.hpp"
#include "ensers/sensing.hpp"

namespace ensers {

enum class InnerLoss { Mse, Huber };
enum class InnerInit { Zero, Gaussian };

InnerLoss parse_inner_loss(const std::string& name);
std::string to_string(InnerLoss l);
InnerInit parse_inner_init(const std::string& name);
std::string to_string(InnerInit i);

/// Gradient descent on the sensor-reconstruction energy over the reduced state.
struct InnerConfig {
  std::size_t steps = 4;
  double step_size = 0.1;
  InnerInit init = InnerInit::Zero;
  double init_sigma = 0.1;
  std::uint64_t init_seed = 0;
  /// Record the steps so the returned state carries gradients w.r.t. the network.
  bool unroll = false;
  /// With unroll, treat each inner gradient as a constant (stop-gradient).
  bool first_order = false;
  InnerLoss loss = InnerLoss::Mse;
  /// Abort when the inner loss exceeds this multiple of its initial value.
  double divergence_factor = 1e6;

  void validate() const;
};

struct InferenceTrace {
  std::vector<double> losses;  // energy before each update
  Tensor xi;
};

struct InferResult {
  ad::Var xi;
  InferenceTrace trace;
};

/// Q[i, m, j] = D[i, m, idx(i, m, j)] for a (gamma, M, omega) block; the index
/// list comes from IndexLayout::window.
ad::Var sensor_project(ad::Var d, const IndexList& idx, std::size_t gamma, std::size_t variables, std::size_t count);

/// Sensor readings for one chunk: values (gamma, M, p) and their flat indices
/// into the decoded block.
struct SensorBlock {
  Tensor values;
  IndexList index;
};

/// Runs the inner loop on the decoder's tape. coords must be given exactly
/// when the decoder is continuous.
InferResult infer(const BoundDecoder& dec, const SensorBlock& sensors, const InnerConfig& cfg,
                  const ad::Var* coords = nullptr);

/// One labelled sample for the outer objective.
struct OuterSample {
  SensorBlock sensors;
  SensorBlock labels;
  Tensor coords;  // continuous decoders only
};

/// Outer data loss mse(labels, label_project(decode(infer(sensors)))) recorded
/// on a bound decoder.
ad::Var outer_data_loss(const BoundDecoder& dec, const OuterSample& sample, const InnerConfig& cfg);

/// Gradient of the outer data loss w.r.t. every parameter, flattened in
/// parameter order.
Tensor outer_gradient(const DecoderNet& net, const OuterSample& sample, const InnerConfig& cfg);

/// Max relative error (|a - fd| / (|fd| + 1e-12)) between outer_gradient and
/// central differences over the parameters.
double outer_gradient_check(const DecoderNet& net, const OuterSample& sample, const InnerConfig& cfg,
                            double step = 1e-5);

}  // namespace ensers
