#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ensers/autodiff/ops.hpp"

namespace ensers {

enum class Activation { Softplus, Tanh };
enum class DecoderMode { Discrete, Continuous };

Activation parse_activation(const std::string& name);
std::string to_string(Activation a);
DecoderMode parse_decoder_mode(const std::string& name);
std::string to_string(DecoderMode m);

/// Fully connected architecture. widths = {input, hidden..., output}; the
/// output layer is linear, every hidden layer uses the activation.
struct NetConfig {
  std::vector<std::size_t> widths;
  Activation activation = Activation::Softplus;
  std::uint64_t seed = 0;
};

/// What the network output means: a (gamma, M, omega) block decoded either
/// in one pass (discrete) or one collocation point at a time (continuous).
struct DecoderLayout {
  DecoderMode mode = DecoderMode::Discrete;
  std::size_t gamma = 1;
  std::size_t variables = 1;  // M
  std::size_t points = 1;     // omega
  std::size_t latent = 1;     // reduced state size
  std::size_t coord_dim = 0;  // continuous mode only

  std::size_t input_width() const { return mode == DecoderMode::Discrete ? latent : latent + coord_dim; }
  std::size_t output_width() const {
    return mode == DecoderMode::Discrete ? gamma * variables * points : gamma * variables;
  }
};

class DecoderNet;

/// A decoder whose parameters live on a tape.
class BoundDecoder {
 public:
  BoundDecoder(const DecoderNet& net, std::vector<ad::Var> params) : net_(&net), params_(std::move(params)) {}

  const DecoderNet& net() const { return *net_; }
  const std::vector<ad::Var>& params() const { return params_; }
  ad::Tape& tape() const { return params_.front().tape(); }

  /// rows: n x input_width -> n x output_width.
  ad::Var forward(ad::Var rows) const;
  /// xi: (latent) -> (gamma, M, omega).
  ad::Var decode_discrete(ad::Var xi) const;
  /// xi: (latent), coords: (n, coord_dim) -> (gamma, M, n), one network pass per point.
  ad::Var decode_continuous(ad::Var xi, ad::Var coords) const;
  /// Dispatches on the layout mode; coords ignored in discrete mode.
  ad::Var decode(ad::Var xi, const ad::Var* coords) const;

 private:
  const DecoderNet* net_;
  std::vector<ad::Var> params_;
};

class DecoderNet {
 public:
  /// Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)) from the config seed, biases zero.
  DecoderNet(NetConfig config, DecoderLayout layout);

  const NetConfig& config() const { return config_; }
  const DecoderLayout& layout() const { return layout_; }

  /// Parameters in order W0, b0, W1, b1, ... with W_l of shape (fan_in, fan_out).
  const std::vector<Tensor>& params() const { return params_; }
  std::vector<Tensor>& params() { return params_; }
  std::size_t parameter_count() const;

  /// Registers every parameter on the tape, as leaves when trainable.
  BoundDecoder bind(ad::Tape& tape, bool trainable) const;

  /// Checkpoint: JSON header (architecture, layout, extra metadata) and the
  /// parameters flattened in order.
  void save(const std::filesystem::path& path, const nlohmann::json& extra = nlohmann::json::object()) const;
  static DecoderNet load(const std::filesystem::path& path, nlohmann::json* extra = nullptr);

 private:
  NetConfig config_;
  DecoderLayout layout_;
  std::vector<Tensor> params_;
};

}  // namespace ensers
