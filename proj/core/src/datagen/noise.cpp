#include "ensers/datagen/noise.hpp"

#include <cmath>
#include <random>

#include "ensers/error.hpp"

namespace ensers {

double noise_sigma(const Tensor& s, double snr_db) {
  if (s.empty()) throw ConfigError("add_noise: empty signal");
  double power = 0.0;
  for (double v : s.values()) power += v * v;
  power /= static_cast<double>(s.size());
  return std::sqrt(power / (2.0 * std::pow(10.0, snr_db / 10.0)));
}

Tensor add_noise(const Tensor& s, const NoiseSpec& spec) {
  if (!spec.snr_db) return s;
  const double sigma = noise_sigma(s, *spec.snr_db);
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Tensor r = s;
  for (double& v : r.values()) v += sigma * normal(rng);
  return r;
}

double realized_snr_db(const Tensor& clean, const Tensor& noisy) {
  if (clean.shape() != noisy.shape() || clean.empty()) throw ShapeError("realized_snr_db: shape mismatch");
  const double n = static_cast<double>(clean.size());
  double power = 0.0;
  double mean = 0.0;
  for (std::size_t i = 0; i < clean.size(); ++i) {
    power += clean[i] * clean[i];
    mean += noisy[i] - clean[i];
  }
  power /= n;
  mean /= n;
  double var = 0.0;
  for (std::size_t i = 0; i < clean.size(); ++i) {
    const double e = noisy[i] - clean[i] - mean;
    var += e * e;
  }
  var /= n;
  return 10.0 * std::log10(power / (2.0 * var));
}

}  // namespace ensers
