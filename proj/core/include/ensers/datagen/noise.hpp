#pragma once

#include <cstdint>
#include <optional>

#include "ensers/tensor.hpp"

namespace ensers {

/// Additive Gaussian measurement noise calibrated by SNR in dB.
struct NoiseSpec {
  std::optional<double> snr_db;  // none: values pass through untouched
  std::uint64_t seed = 0;
};

/// r = s + sqrt(P / (2 * 10^(snr/10))) * N(0, 1), with P = sum(s^2) / n taken
/// over the tensor being corrupted.
Tensor add_noise(const Tensor& s, const NoiseSpec& spec);

/// Standard deviation add_noise would use for this signal.
double noise_sigma(const Tensor& s, double snr_db);

/// SNR in dB recovered from a clean/noisy pair under the same convention as
/// add_noise, i.e. 10 log10(P / (2 var(r - s))).
double realized_snr_db(const Tensor& clean, const Tensor& noisy);

}  // namespace ensers
