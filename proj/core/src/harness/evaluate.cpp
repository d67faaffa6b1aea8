#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>

#include "ensers/error.hpp"
#include "ensers/harness.hpp"
#include "ensers/io.hpp"
#include "harness/common.hpp"

namespace ensers {

void TestConfig::validate() const {
  if (!(eta_i > 0.0)) throw ConfigError("test: inner step size must be positive");
  if (inner_steps == 0) throw ConfigError("test: inner step count must be >= 1");
  if (sensor_counts.empty()) throw ConfigError("test: sensor count list is empty");
  if (snr_db.empty()) throw ConfigError("test: SNR list is empty");
  for (std::size_t p : sensor_counts) {
    if (p == 0) throw ConfigError("test: sensor counts must be >= 1");
  }
  if (chunks.empty() && samples == 0) throw ConfigError("test: sample count must be >= 1");
}

Tensor predict(const DecoderNet& net, const SensorBlock& sensors, const InnerConfig& cfg, const Tensor* infer_coords,
               const Tensor* eval_coords) {
  ad::Tape tape;
  BoundDecoder dec = net.bind(tape, false);
  if (net.layout().mode == DecoderMode::Discrete) {
    return dec.decode_discrete(infer(dec, sensors, cfg).xi).value();
  }
  if (!infer_coords) throw ConfigError("predict: continuous decoders need coordinates");
  auto s = detail::compact(sensors.index, infer_coords->dim(0), *infer_coords);
  ad::Var sc = tape.constant(s.coords);
  ad::Var xi = infer(dec, {sensors.values, s.index}, cfg, &sc).xi;
  return dec.decode_continuous(xi, tape.constant(eval_coords ? *eval_coords : *infer_coords)).value();
}

double relative_error(std::span<const double> d, std::span<const double> j) {
  if (d.size() != j.size()) throw ShapeError("relative_error: length mismatch");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    num += (d[i] - j[i]) * (d[i] - j[i]);
    den += j[i] * j[i];
  }
  if (den == 0.0) throw NonFiniteError("relative_error: reference field is identically zero");
  return std::sqrt(num) / std::sqrt(den);
}

Tensor baseline_field(const SnapshotSet& data, const std::vector<std::size_t>& train_chunks, std::size_t gamma,
                      std::size_t stride) {
  std::vector<bool> used(data.steps(), false);
  for (std::size_t k : train_chunks) {
    if (k * stride + gamma > data.steps()) throw ConfigError("baseline: chunk outside the trajectory");
    for (std::size_t i = 0; i < gamma; ++i) used[k * stride + i] = true;
  }
  const std::size_t row = data.variables() * data.points();
  Tensor mean(Shape{data.variables(), data.points()}, 0.0);
  std::size_t n = 0;
  for (std::size_t l = 0; l < data.steps(); ++l) {
    if (!used[l]) continue;
    ++n;
    for (std::size_t r = 0; r < row; ++r) mean[r] += data.z[l * row + r];
  }
  if (n == 0) throw ConfigError("baseline: no training chunks");
  for (double& v : mean.values()) v /= static_cast<double>(n);
  return mean;
}

std::vector<std::size_t> test_chunk_indices(const SnapshotSet& data, const TestConfig& cfg, std::size_t gamma,
                                            std::size_t stride) {
  const std::size_t total = chunk_count(data.steps(), gamma, stride);
  if (!cfg.chunks.empty()) {
    for (std::size_t k : cfg.chunks) {
      if (k >= total) throw ConfigError("test: chunk " + std::to_string(k) + " outside " + std::to_string(total));
    }
    return cfg.chunks;
  }
  if (cfg.samples > total) {
    throw ConfigError("test: " + std::to_string(cfg.samples) + " samples requested from " + std::to_string(total) +
                      " chunks");
  }
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < cfg.samples; ++i) {
    out.push_back(cfg.samples == 1 ? 0
                                   : static_cast<std::size_t>(std::llround(static_cast<double>(i * (total - 1)) /
                                                                           static_cast<double>(cfg.samples - 1))));
  }
  return out;
}

ErrorReport test(const DecoderNet& net, const SnapshotSet& data, const TestConfig& cfg, std::size_t stride,
                 const Tensor& baseline) {
  cfg.validate();
  data.validate();
  const auto& lay = net.layout();
  const std::size_t gamma = lay.gamma;
  detail::check_net(net, data, gamma, "test");
  if (cfg.gamma_star >= gamma) {
    throw ConfigError("test: gamma* = " + std::to_string(cfg.gamma_star) + " outside the window of " +
                      std::to_string(gamma));
  }
  const std::size_t M = data.variables(), omega = data.points();
  if (baseline.shape() != Shape{M, omega}) throw ShapeError("test: baseline must be (M, omega)");
  const auto ks = test_chunk_indices(data, cfg, gamma, stride);
  const Tensor coords = grid_coords(data.grid);
  const Tensor* cp = lay.mode == DecoderMode::Continuous ? &coords : nullptr;

  InnerConfig inner;
  inner.steps = cfg.inner_steps;
  inner.step_size = cfg.eta_i;
  inner.loss = cfg.loss;

  ErrorReport report;
  for (std::size_t pi = 0; pi < cfg.sensor_counts.size(); ++pi) {
    const std::size_t p = cfg.sensor_counts[pi];
    const IndexLayout layout = sample_layout(data.steps(), M, p, omega, detail::mix_seed(cfg.seed, 100 + p));
    for (std::size_t si = 0; si < cfg.snr_db.size(); ++si) {
      const NoiseSpec noise{cfg.snr_db[si], detail::mix_seed(detail::mix_seed(cfg.seed, 200 + p), si)};
      const Tensor meas = measure(data.z, layout, noise);
      for (std::size_t k : ks) {
        const std::size_t start = k * stride;
        const std::size_t l = start + cfg.gamma_star;
        SensorBlock block{time_window(meas, start, gamma), layout.window(start, gamma)};
        Tensor d;
        bool ok = true;
        try {
          d = predict(net, block, inner, cp);
        } catch (const DivergenceError&) {
          ok = false;
        } catch (const NonFiniteError&) {
          ok = false;
        }
        for (std::size_t m = 0; m < M; ++m) {
          std::span<const double> j(data.z.raw() + (l * M + m) * omega, omega);
          SampleError row{k, m, p, cfg.snr_db[si], std::numeric_limits<double>::quiet_NaN(), 0.0};
          row.baseline = relative_error(std::span<const double>(baseline.raw() + m * omega, omega), j);
          if (ok && d.all_finite()) {
            row.eps = relative_error(std::span<const double>(d.raw() + (cfg.gamma_star * M + m) * omega, omega), j);
          }
          report.rows.push_back(row);
        }
      }
    }
  }
  return report;
}

namespace {

struct Stats {
  std::size_t count = 0, failures = 0;
  double mean = 0, median = 0, q1 = 0, q3 = 0, min = 0, max = 0;
};

double quantile(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

Stats stats(std::vector<double> v) {
  Stats s;
  const std::size_t all = v.size();
  std::erase_if(v, [](double x) { return !std::isfinite(x); });
  s.count = v.size();
  s.failures = all - v.size();
  if (v.empty()) return s;
  std::sort(v.begin(), v.end());
  double sum = 0.0;
  for (double x : v) sum += x;
  s.mean = sum / static_cast<double>(v.size());
  s.median = quantile(v, 0.5);
  s.q1 = quantile(v, 0.25);
  s.q3 = quantile(v, 0.75);
  s.min = v.front();
  s.max = v.back();
  return s;
}

nlohmann::json to_json(const Stats& s) {
  if (s.count == 0) return {{"count", 0}, {"failures", s.failures}};
  return {{"count", s.count}, {"failures", s.failures}, {"mean", s.mean}, {"median", s.median},
          {"q1", s.q1},       {"q3", s.q3},             {"min", s.min},   {"max", s.max}};
}

nlohmann::json snr_json(const std::optional<double>& snr) { return snr ? nlohmann::json(*snr) : nlohmann::json(); }

std::string snr_text(const std::optional<double>& snr) {
  if (!snr) return "none";
  std::ostringstream os;
  os << std::setprecision(17) << *snr;
  return os.str();
}

}  // namespace

nlohmann::json ErrorReport::summary() const {
  // Cells keyed by (m, p, snr) in first-appearance order.
  std::vector<std::tuple<std::size_t, std::size_t, std::optional<double>>> keys;
  std::map<std::tuple<std::size_t, std::size_t, int, double>, std::size_t> slot;
  std::vector<std::vector<double>> eps, base;
  for (const auto& r : rows) {
    auto key = std::make_tuple(r.m, r.p, r.snr_db ? 1 : 0, r.snr_db.value_or(0.0));
    auto [it, inserted] = slot.emplace(key, keys.size());
    if (inserted) {
      keys.emplace_back(r.m, r.p, r.snr_db);
      eps.emplace_back();
      base.emplace_back();
    }
    eps[it->second].push_back(r.eps);
    base[it->second].push_back(r.baseline);
  }
  nlohmann::json cells = nlohmann::json::array();
  for (std::size_t i = 0; i < keys.size(); ++i) {
    const auto& [m, p, snr] = keys[i];
    cells.push_back({{"m", m},
                     {"p", p},
                     {"snr_db", snr_json(snr)},
                     {"eps", to_json(stats(eps[i]))},
                     {"baseline", to_json(stats(base[i]))}});
  }
  std::vector<double> all_eps, all_base;
  for (const auto& r : rows) {
    all_eps.push_back(r.eps);
    all_base.push_back(r.baseline);
  }
  return {{"rows", rows.size()},
          {"cells", cells},
          {"overall", {{"eps", to_json(stats(all_eps))}, {"baseline", to_json(stats(all_base))}}}};
}

double ErrorReport::mean_eps(std::size_t p, std::optional<std::optional<double>> snr) const {
  std::vector<double> v;
  for (const auto& r : rows) {
    if (r.p == p && (!snr || *snr == r.snr_db)) v.push_back(r.eps);
  }
  const Stats s = stats(v);
  return s.count ? s.mean : std::numeric_limits<double>::quiet_NaN();
}

double ErrorReport::mean_baseline(std::size_t p) const {
  std::vector<double> v;
  for (const auto& r : rows) {
    if (r.p == p) v.push_back(r.baseline);
  }
  const Stats s = stats(v);
  return s.count ? s.mean : std::numeric_limits<double>::quiet_NaN();
}

std::size_t ErrorReport::failures() const {
  return static_cast<std::size_t>(std::count_if(rows.begin(), rows.end(), [](const SampleError& r) {
    return !std::isfinite(r.eps);
  }));
}

void write_report(const ErrorReport& report, const std::filesystem::path& csv, const std::filesystem::path& json) {
  if (report.rows.empty()) throw ConfigError("report: no rows to write");
  std::ostringstream os;
  os << std::setprecision(17);
  os << "k,m,p,snr_db,eps,baseline\n";
  for (const auto& r : report.rows) {
    os << r.k << ',' << r.m << ',' << r.p << ',' << snr_text(r.snr_db) << ',';
    if (std::isfinite(r.eps)) {
      os << r.eps;
    } else {
      os << "nan";
    }
    os << ',' << r.baseline << '\n';
  }
  io::write_text(csv, os.str());
  io::write_text(json, report.summary().dump(2) + "\n");
}

ErrorReport read_report_csv(const std::filesystem::path& csv) {
  std::istringstream in(io::read_text(csv));
  std::string line;
  if (!std::getline(in, line) || line != "k,m,p,snr_db,eps,baseline") {
    throw IoError(csv.string() + ": missing or unexpected report header");
  }
  ErrorReport report;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) f.push_back(cell);
    if (f.size() != 6) throw IoError(csv.string() + ":" + std::to_string(lineno) + ": expected 6 fields");
    try {
      SampleError r;
      r.k = std::stoull(f[0]);
      r.m = std::stoull(f[1]);
      r.p = std::stoull(f[2]);
      if (f[3] != "none") r.snr_db = std::stod(f[3]);
      r.eps = f[4] == "nan" ? std::numeric_limits<double>::quiet_NaN() : std::stod(f[4]);
      r.baseline = std::stod(f[5]);
      report.rows.push_back(r);
    } catch (const std::logic_error&) {
      throw IoError(csv.string() + ":" + std::to_string(lineno) + ": malformed number");
    }
  }
  return report;
}

std::string format_summary(const nlohmann::json& summary) {
  std::ostringstream os;
  os << std::left << std::setw(4) << "m" << std::setw(6) << "p" << std::setw(8) << "snr" << std::setw(7) << "n"
     << std::setw(6) << "fail" << std::setw(12) << "mean" << std::setw(12) << "median" << std::setw(12) << "q1"
     << std::setw(12) << "q3" << "baseline\n";
  os << std::setprecision(4);
  for (const auto& c : summary.at("cells")) {
    const auto& e = c.at("eps");
    const std::string snr = c.at("snr_db").is_null() ? "none" : snr_text(c.at("snr_db").get<double>());
    os << std::setw(4) << c.at("m").get<std::size_t>() << std::setw(6) << c.at("p").get<std::size_t>()
       << std::setw(8) << snr << std::setw(7) << e.at("count").get<std::size_t>() << std::setw(6)
       << e.at("failures").get<std::size_t>();
    if (e.at("count").get<std::size_t>() > 0) {
      os << std::setw(12) << e.at("mean").get<double>() << std::setw(12) << e.at("median").get<double>()
         << std::setw(12) << e.at("q1").get<double>() << std::setw(12) << e.at("q3").get<double>();
    } else {
      os << std::setw(48) << "-";
    }
    const auto& b = c.at("baseline");
    if (b.at("count").get<std::size_t>() > 0) {
      os << b.at("mean").get<double>();
    } else {
      os << "-";
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace ensers
