#include <algorithm>
#include <cmath>
#include <exception>
#include <numeric>
#include <random>
#include <thread>

#include "ensers/autodiff/gradient.hpp"
#include "ensers/error.hpp"
#include "ensers/harness.hpp"
#include "ensers/io.hpp"
#include "harness/common.hpp"

namespace ensers {

Optimizer parse_optimizer(const std::string& name) {
  if (name == "gd") return Optimizer::Gd;
  if (name == "adam") return Optimizer::Adam;
  throw ConfigError("unknown optimizer '" + name + "' (expected gd or adam)");
}

std::string to_string(Optimizer o) { return o == Optimizer::Gd ? "gd" : "adam"; }

void TrainConfig::validate() const {
  if (!(eta_o > 0.0) || !(eta_i0 > 0.0)) throw ConfigError("train: step sizes must be positive");
  if (eta_i_slope < 0.0 || zeta0 < 0.0 || zeta_slope < 0.0) throw ConfigError("train: schedule slopes and zeta must be >= 0");
  if (batch == 0) throw ConfigError("train: batch must be >= 1");
  if (epochs == 0 || inner_steps == 0) throw ConfigError("train: epoch and inner step counts must be >= 1");
  if (sensors == 0) throw ConfigError("train: sensor count p must be >= 1");
  if (labels == 0) throw ConfigError("train: label count h must be >= 1");
  if (gamma == 0 || stride == 0) throw ConfigError("train: gamma and stride must be >= 1");
  if (chunks.empty() && samples == 0) throw ConfigError("train: sample count N must be >= 1");
  if (!(divergence_limit > 0.0)) throw ConfigError("train: divergence limit must be positive");
  if (threads == 0) throw ConfigError("train: threads must be >= 1");
  if (optimizer == Optimizer::Adam &&
      (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0) || !(adam_eps > 0.0))) {
    throw ConfigError("train: Adam betas must lie in [0, 1) and eps be positive");
  }
}

Tensor grid_coords(const Grid& grid) {
  const std::size_t n = grid.points();
  const std::size_t d = grid.two_d() ? 2 : 1;
  Tensor c(Shape{n, d});
  for (std::size_t r = 0; r < n; ++r) {
    c[r * d] = grid.x(r);
    if (d == 2) c[r * d + 1] = grid.y(r);
  }
  return c;
}

std::vector<std::size_t> train_chunk_indices(const SnapshotSet& data, const TrainConfig& cfg) {
  const std::size_t total = chunk_count(data.steps(), cfg.gamma, cfg.stride);
  if (!cfg.chunks.empty()) {
    for (std::size_t k : cfg.chunks) {
      if (k >= total) throw ConfigError("train: chunk " + std::to_string(k) + " outside " + std::to_string(total));
    }
    return cfg.chunks;
  }
  if (cfg.samples > total) {
    throw ConfigError("train: N = " + std::to_string(cfg.samples) + " exceeds the " + std::to_string(total) +
                      " available chunks");
  }
  std::vector<std::size_t> out(cfg.samples);
  std::iota(out.begin(), out.end(), std::size_t{0});
  return out;
}

TrainLayouts make_train_layouts(const SnapshotSet& data, const TrainConfig& cfg) {
  return {sample_layout(data.steps(), data.variables(), cfg.sensors, data.points(), detail::mix_seed(cfg.seed, 1)),
          sample_layout(data.steps(), data.variables(), cfg.labels, data.points(), detail::mix_seed(cfg.seed, 2))};
}

ad::Var label_project(ad::Var d, const IndexLayout& labels, std::size_t start, std::size_t gamma) {
  if (labels.count == 0) throw ConfigError("label_project: empty label layout (h = 0)");
  return sensor_project(d, labels.window(start, gamma, d.value().dim(2)), gamma, labels.variables, labels.count);
}

namespace detail {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t tag) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (tag + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

RhsSpec rhs_spec(const SnapshotSet& data) {
  RhsSpec s;
  s.system = data.system;
  s.nu = data.params.value("nu", s.nu);
  s.rho = data.params.value("rho", s.rho);
  return s;
}

Compacted compact(const IndexList& idx, std::size_t omega, const Tensor& coords) {
  std::vector<std::size_t> used;
  used.reserve(idx->size());
  for (std::size_t f : *idx) used.push_back(f % omega);
  std::sort(used.begin(), used.end());
  used.erase(std::unique(used.begin(), used.end()), used.end());
  std::vector<std::size_t> pos(omega, 0);
  for (std::size_t i = 0; i < used.size(); ++i) pos[used[i]] = i;
  std::vector<std::size_t> remap;
  remap.reserve(idx->size());
  for (std::size_t f : *idx) remap.push_back((f / omega) * used.size() + pos[f % omega]);
  const std::size_t d = coords.dim(1);
  Tensor sub(Shape{used.size(), d});
  for (std::size_t i = 0; i < used.size(); ++i) {
    for (std::size_t c = 0; c < d; ++c) sub[i * d + c] = coords[used[i] * d + c];
  }
  return {make_index(std::move(remap)), std::move(sub)};
}

void check_net(const DecoderNet& net, const SnapshotSet& data, std::size_t gamma, const char* who) {
  const auto& lay = net.layout();
  if (lay.gamma != gamma) {
    throw ConfigError(std::string(who) + ": checkpoint gamma " + std::to_string(lay.gamma) + " != config gamma " +
                      std::to_string(gamma));
  }
  if (lay.variables != data.variables()) {
    throw ConfigError(std::string(who) + ": checkpoint has " + std::to_string(lay.variables) +
                      " variables, dataset has " + std::to_string(data.variables()));
  }
  if (lay.mode == DecoderMode::Discrete && lay.points != data.points()) {
    throw ConfigError(std::string(who) + ": checkpoint decodes " + std::to_string(lay.points) +
                      " points, dataset grid has " + std::to_string(data.points()));
  }
  if (lay.mode == DecoderMode::Continuous && lay.coord_dim != (data.grid.two_d() ? 2u : 1u)) {
    throw ConfigError(std::string(who) + ": checkpoint coordinate dimension does not match the dataset grid");
  }
}

}  // namespace detail

namespace {

struct SampleResult {
  std::vector<Tensor> grads;
  double total = 0.0, data = 0.0, physics = 0.0;
};

struct Context {
  const DecoderNet* net;
  const SnapshotSet* data;
  const TrainLayouts* layouts;
  const TrainConfig* cfg;
  Tensor sensor_values;  // (L, M, p)
  Tensor label_values;   // (L, M, h)
  Tensor coords;         // continuous only
  RhsSpec rhs;
  std::optional<ButcherTableau> tableau;
  double dt = 0.0;
};

Tensor collocation_points(const Context& ctx, std::size_t epoch, std::size_t k) {
  const std::size_t n = ctx.coords.dim(0);
  const std::size_t want = ctx.cfg->collocation;
  if (want == 0 || want >= n) return ctx.coords;
  std::vector<std::size_t> rows(n);
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  std::mt19937_64 rng(detail::mix_seed(detail::mix_seed(detail::mix_seed(ctx.cfg->seed, 11), epoch), k));
  for (std::size_t i = 0; i < want; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(rows[i], rows[pick(rng)]);
  }
  const std::size_t d = ctx.coords.dim(1);
  Tensor out(Shape{want, d});
  for (std::size_t i = 0; i < want; ++i) {
    for (std::size_t c = 0; c < d; ++c) out[i * d + c] = ctx.coords[rows[i] * d + c];
  }
  return out;
}

SampleResult run_sample(const Context& ctx, std::size_t epoch, std::size_t k) {
  const TrainConfig& cfg = *ctx.cfg;
  const auto& lay = ctx.net->layout();
  const std::size_t start = k * cfg.stride;
  const std::size_t omega = ctx.data->points();
  const double zeta = cfg.zeta(epoch);

  ad::Tape tape;
  BoundDecoder dec = ctx.net->bind(tape, true);
  InnerConfig inner;
  inner.steps = cfg.inner_steps;
  inner.step_size = cfg.eta_i(epoch);
  inner.unroll = true;
  inner.first_order = cfg.first_order;

  SensorBlock sensors{time_window(ctx.sensor_values, start, cfg.gamma), ctx.layouts->sensors.window(start, cfg.gamma)};
  const Tensor labels = time_window(ctx.label_values, start, cfg.gamma);
  const IndexList label_idx = ctx.layouts->labels.window(start, cfg.gamma);

  ad::Var data_loss, physics;
  if (lay.mode == DecoderMode::Discrete) {
    ad::Var xi = infer(dec, sensors, inner).xi;
    ad::Var d = dec.decode_discrete(xi);
    ad::Var y = sensor_project(d, label_idx, cfg.gamma, lay.variables, labels.dim(2));
    data_loss = ad::mse(y, tape.constant(labels));
    if (zeta > 0.0) physics = physics_loss_discrete(d, ctx.dt, *ctx.tableau, ctx.rhs, ctx.data->grid);
  } else {
    // Decode only the grid points a window actually touches.
    auto s = detail::compact(sensors.index, omega, ctx.coords);
    sensors.index = s.index;
    ad::Var sc = tape.constant(s.coords);
    ad::Var xi = infer(dec, sensors, inner, &sc).xi;
    auto l = detail::compact(label_idx, omega, ctx.coords);
    ad::Var d = dec.decode_continuous(xi, tape.constant(l.coords));
    ad::Var y = sensor_project(d, l.index, cfg.gamma, lay.variables, labels.dim(2));
    data_loss = ad::mse(y, tape.constant(labels));
    if (zeta > 0.0) {
      ad::Var colloc = tape.leaf(collocation_points(ctx, epoch, k), "collocation");
      physics = physics_loss_continuous(dec, xi, colloc, ctx.dt, *ctx.tableau, ctx.data->system);
    }
  }
  ad::Var total = physics.valid() ? data_loss + zeta * physics : data_loss;

  SampleResult r;
  r.data = data_loss.value().item();
  r.physics = physics.valid() ? physics.value().item() : 0.0;
  r.total = total.value().item();
  if (!std::isfinite(r.total) || r.total > cfg.divergence_limit) {
    throw DivergenceError("loss " + std::to_string(r.total) + " exceeds the divergence limit");
  }
  r.grads = ad::gradient(total, dec.params());
  for (const auto& g : r.grads) {
    if (!g.all_finite()) throw DivergenceError("non-finite parameter gradient");
  }
  return r;
}

std::vector<SampleResult> run_batch(const Context& ctx, std::size_t epoch, std::span<const std::size_t> ks) {
  std::vector<SampleResult> out(ks.size());
  std::vector<std::exception_ptr> errors(ks.size());
  auto work = [&](std::size_t i) {
    try {
      out[i] = run_sample(ctx, epoch, ks[i]);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  const std::size_t workers = std::min(ctx.cfg->threads, ks.size());
  if (workers <= 1) {
    for (std::size_t i = 0; i < ks.size(); ++i) work(i);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t i = w; i < ks.size(); i += workers) work(i);
      });
    }
  }
  for (std::size_t i = 0; i < ks.size(); ++i) {
    if (!errors[i]) continue;
    const std::string where = "epoch " + std::to_string(epoch) + ", sample " + std::to_string(ks[i]) + ": ";
    try {
      std::rethrow_exception(errors[i]);
    } catch (const DivergenceError& e) {
      throw DivergenceError(where + e.what());
    } catch (const NonFiniteError& e) {
      throw NonFiniteError(where + e.what());
    }
  }
  return out;
}

}  // namespace

void train(DecoderNet& net, const SnapshotSet& data, const TrainLayouts& layouts, const TrainConfig& cfg,
           TrainState& state, const EpochCallback& on_epoch) {
  cfg.validate();
  data.validate();
  detail::check_net(net, data, cfg.gamma, "train");
  for (const IndexLayout* l : {&layouts.sensors, &layouts.labels}) {
    if (l->steps != data.steps() || l->variables != data.variables() || l->points != data.points()) {
      throw ConfigError("train: layout does not match the dataset shape");
    }
  }
  const auto ks = train_chunk_indices(data, cfg);

  Context ctx{&net, &data, &layouts, &cfg, {}, {}, {}, detail::rhs_spec(data), std::nullopt, 0.0};
  ctx.sensor_values = measure(data.z, layouts.sensors, cfg.sensor_noise);
  ctx.label_values = measure(data.z, layouts.labels);
  if (net.layout().mode == DecoderMode::Continuous) ctx.coords = grid_coords(data.grid);
  const bool physics = cfg.zeta0 > 0.0 || cfg.zeta_slope > 0.0;
  if (physics) {
    if (cfg.gamma < 3) throw ConfigError("train: the physics loss needs gamma >= 3");
    ctx.tableau = collocation_tableau(cfg.gamma - 2);
    ctx.dt = static_cast<double>(cfg.gamma - 1) * data.dt_output;
  }

  auto& params = net.params();
  if (cfg.optimizer == Optimizer::Adam && state.adam_m.empty()) {
    for (const auto& p : params) {
      state.adam_m.push_back(Tensor::zeros_like(p));
      state.adam_v.push_back(Tensor::zeros_like(p));
    }
  }

  for (std::size_t epoch = state.epoch; epoch < cfg.epochs; ++epoch) {
    std::vector<std::size_t> order = ks;
    std::mt19937_64 rng(detail::mix_seed(detail::mix_seed(cfg.seed, 10), epoch));
    std::shuffle(order.begin(), order.end(), rng);

    double sum_total = 0.0, sum_data = 0.0, sum_physics = 0.0;
    for (std::size_t b = 0; b < order.size(); b += cfg.batch) {
      const std::size_t n = std::min(cfg.batch, order.size() - b);
      auto results = run_batch(ctx, epoch, std::span<const std::size_t>(order).subspan(b, n));
      std::vector<Tensor> grad = results.front().grads;
      for (std::size_t i = 1; i < n; ++i) {
        for (std::size_t p = 0; p < grad.size(); ++p) {
          auto& g = grad[p].values();
          const auto& h = results[i].grads[p].values();
          for (std::size_t j = 0; j < g.size(); ++j) g[j] += h[j];
        }
      }
      for (const auto& r : results) {
        sum_total += r.total;
        sum_data += r.data;
        sum_physics += r.physics;
      }
      const double inv = 1.0 / static_cast<double>(n);
      if (cfg.optimizer == Optimizer::Gd) {
        for (std::size_t p = 0; p < params.size(); ++p) {
          auto& w = params[p].values();
          const auto& g = grad[p].values();
          for (std::size_t j = 0; j < w.size(); ++j) w[j] -= cfg.eta_o * g[j] * inv;
        }
      } else {
        ++state.adam_t;
        const double c1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(state.adam_t));
        const double c2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(state.adam_t));
        for (std::size_t p = 0; p < params.size(); ++p) {
          auto& w = params[p].values();
          auto& m = state.adam_m[p].values();
          auto& v = state.adam_v[p].values();
          const auto& g = grad[p].values();
          for (std::size_t j = 0; j < w.size(); ++j) {
            const double gj = g[j] * inv;
            m[j] = cfg.adam_beta1 * m[j] + (1.0 - cfg.adam_beta1) * gj;
            v[j] = cfg.adam_beta2 * v[j] + (1.0 - cfg.adam_beta2) * gj * gj;
            w[j] -= cfg.eta_o * (m[j] / c1) / (std::sqrt(v[j] / c2) + cfg.adam_eps);
          }
        }
      }
    }
    const double count = static_cast<double>(order.size());
    state.loss.push_back(sum_total / count);
    state.data_loss.push_back(sum_data / count);
    state.physics_loss.push_back(sum_physics / count);
    state.epoch = epoch + 1;
    if (on_epoch && !on_epoch(net, state)) break;
  }
}

void save_training(const std::filesystem::path& path, const DecoderNet& net, const TrainState& state,
                   const nlohmann::json& extra) {
  nlohmann::json h = {{"kind", "ensers-train-state"},
                      {"epoch", state.epoch},
                      {"loss", state.loss},
                      {"data_loss", state.data_loss},
                      {"physics_loss", state.physics_loss},
                      {"adam_t", state.adam_t},
                      {"moments", state.adam_m.size()}};
  std::vector<double> payload;
  for (const auto* group : {&state.adam_m, &state.adam_v}) {
    for (const auto& t : *group) payload.insert(payload.end(), t.values().begin(), t.values().end());
  }
  auto state_path = path;
  state_path += ".state";
  io::write_blob(state_path, h, payload);
  nlohmann::json meta = extra;
  meta["epoch"] = state.epoch;
  net.save(path, meta);
}

DecoderNet load_training(const std::filesystem::path& path, TrainState& state, nlohmann::json* extra) {
  nlohmann::json meta;
  DecoderNet net = DecoderNet::load(path, &meta);
  auto state_path = path;
  state_path += ".state";
  io::BlobFile blob = io::read_blob(state_path);
  const auto& h = blob.header;
  try {
    if (h.at("kind") != "ensers-train-state") throw IoError(state_path.string() + ": not a training state file");
    if (h.at("epoch").get<std::size_t>() != meta.value("epoch", std::size_t{0})) {
      throw IoError(state_path.string() + ": epoch does not match the checkpoint");
    }
    TrainState s;
    s.epoch = h.at("epoch").get<std::size_t>();
    s.loss = h.at("loss").get<std::vector<double>>();
    s.data_loss = h.at("data_loss").get<std::vector<double>>();
    s.physics_loss = h.at("physics_loss").get<std::vector<double>>();
    s.adam_t = h.at("adam_t").get<std::size_t>();
    const std::size_t moments = h.at("moments").get<std::size_t>();
    if (moments != 0 && moments != net.params().size()) throw IoError(state_path.string() + ": moment count mismatch");
    std::size_t need = 0;
    if (moments != 0) {
      for (const auto& p : net.params()) need += 2 * p.size();
    }
    if (blob.payload.size() != need) throw IoError(state_path.string() + ": payload size mismatch");
    std::size_t off = 0;
    for (auto* group : {&s.adam_m, &s.adam_v}) {
      for (std::size_t i = 0; i < moments; ++i) {
        const auto& p = net.params()[i];
        std::vector<double> v(blob.payload.begin() + static_cast<std::ptrdiff_t>(off),
                              blob.payload.begin() + static_cast<std::ptrdiff_t>(off + p.size()));
        off += p.size();
        group->emplace_back(p.shape(), std::move(v));
      }
    }
    state = std::move(s);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(state_path.string() + ": malformed header: " + e.what());
  }
  if (extra) *extra = meta;
  return net;
}

}  // namespace ensers
