#include "ensers/implicit_layer.hpp"

#include <cmath>
#include <random>

#include "ensers/autodiff/gradient.hpp"
#include "ensers/error.hpp"

namespace ensers {

InnerLoss parse_inner_loss(const std::string& name) {
  if (name == "mse") return InnerLoss::Mse;
  if (name == "huber") return InnerLoss::Huber;
  throw ConfigError("unknown inner loss '" + name + "' (expected mse or huber)");
}

std::string to_string(InnerLoss l) { return l == InnerLoss::Mse ? "mse" : "huber"; }

InnerInit parse_inner_init(const std::string& name) {
  if (name == "zero") return InnerInit::Zero;
  if (name == "gaussian") return InnerInit::Gaussian;
  throw ConfigError("unknown inner init '" + name + "' (expected zero or gaussian)");
}

std::string to_string(InnerInit i) { return i == InnerInit::Zero ? "zero" : "gaussian"; }

void InnerConfig::validate() const {
  if (!(step_size > 0.0)) throw ConfigError("inner step size must be positive");
  if (!(divergence_factor > 1.0)) throw ConfigError("inner divergence factor must exceed 1");
  if (first_order && !unroll) throw ConfigError("first-order inner gradients only apply when unrolling");
}

ad::Var sensor_project(ad::Var d, const IndexList& idx, std::size_t gamma, std::size_t variables, std::size_t count) {
  return ad::gather(d, idx, {gamma, variables, count});
}

namespace {

Tensor initial_state(const InnerConfig& cfg, std::size_t latent) {
  Tensor xi(Shape{latent}, 0.0);
  if (cfg.init == InnerInit::Gaussian) {
    std::mt19937_64 rng(cfg.init_seed);
    std::normal_distribution<double> normal(0.0, cfg.init_sigma);
    for (double& v : xi.values()) v = normal(rng);
  }
  return xi;
}

ad::Var energy(const BoundDecoder& dec, ad::Var xi, ad::Var target, const IndexList& idx, InnerLoss loss,
               const ad::Var* coords) {
  const auto& lay = dec.net().layout();
  ad::Var d = dec.decode(xi, coords);
  ad::Var q = sensor_project(d, idx, lay.gamma, lay.variables, target.value().dim(2));
  return loss == InnerLoss::Mse ? ad::mse(q, target) : ad::huber(q, target, 1.0);
}

}  // namespace

InferResult infer(const BoundDecoder& dec, const SensorBlock& sensors, const InnerConfig& cfg,
                  const ad::Var* coords) {
  cfg.validate();
  const auto& lay = dec.net().layout();
  if ((lay.mode == DecoderMode::Continuous) != (coords != nullptr)) {
    throw ConfigError("infer: coordinates must be supplied exactly for continuous decoders");
  }
  const Tensor& chi = sensors.values;
  if (chi.rank() != 3 || chi.dim(0) != lay.gamma || chi.dim(1) != lay.variables || chi.dim(2) == 0) {
    throw ShapeError("infer: sensor block " + to_string(chi.shape()) + " must be (" + std::to_string(lay.gamma) +
                     ", " + std::to_string(lay.variables) + ", p>=1)");
  }
  if (sensors.index->size() != chi.size()) throw ShapeError("infer: sensor index count does not match values");

  ad::Tape& tape = dec.tape();
  ad::Var target = tape.constant(chi);
  InferResult res;
  ad::Var xi = tape.leaf(initial_state(cfg, lay.latent), "xi0");
  double initial = 0.0;
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    ad::Var e;
    try {
      e = energy(dec, xi, target, sensors.index, cfg.loss, coords);
    } catch (const NonFiniteError& err) {
      throw NonFiniteError("inner step " + std::to_string(step) + ": " + err.what());
    }
    const double value = e.value().item();
    if (step == 0) initial = value;
    if (value > cfg.divergence_factor * initial && value > 0.0) {
      throw DivergenceError("inner loop diverged at step " + std::to_string(step) + ": energy " +
                            std::to_string(value) + " vs initial " + std::to_string(initial));
    }
    res.trace.losses.push_back(value);
    try {
      if (cfg.unroll && !cfg.first_order) {
        xi = xi - cfg.step_size * ad::gradient_graph(e, xi);
      } else if (cfg.unroll) {
        xi = xi - cfg.step_size * tape.constant(ad::gradient(e, xi));
      } else {
        Tensor g = ad::gradient(e, xi);
        Tensor next = xi.value();
        for (std::size_t i = 0; i < next.size(); ++i) next[i] -= cfg.step_size * g[i];
        if (!next.all_finite()) throw NonFiniteError("reduced state became non-finite");
        xi = tape.leaf(std::move(next), "xi");
      }
    } catch (const NonFiniteError& err) {
      throw NonFiniteError("inner step " + std::to_string(step) + ": " + err.what());
    }
  }
  res.xi = xi;
  res.trace.xi = xi.value();
  return res;
}

ad::Var outer_data_loss(const BoundDecoder& dec, const OuterSample& sample, const InnerConfig& cfg) {
  const auto& lay = dec.net().layout();
  ad::Tape& tape = dec.tape();
  ad::Var coords;
  const ad::Var* cp = nullptr;
  if (lay.mode == DecoderMode::Continuous) {
    coords = tape.constant(sample.coords);
    cp = &coords;
  }
  InferResult r = infer(dec, sample.sensors, cfg, cp);
  ad::Var d = dec.decode(r.xi, cp);
  ad::Var y = sensor_project(d, sample.labels.index, lay.gamma, lay.variables, sample.labels.values.dim(2));
  return ad::mse(y, tape.constant(sample.labels.values));
}

Tensor outer_gradient(const DecoderNet& net, const OuterSample& sample, const InnerConfig& cfg) {
  ad::Tape tape;
  BoundDecoder dec = net.bind(tape, true);
  ad::Var loss = outer_data_loss(dec, sample, cfg);
  auto grads = ad::gradient(loss, dec.params());
  std::vector<double> flat;
  for (const auto& g : grads) flat.insert(flat.end(), g.values().begin(), g.values().end());
  const std::size_t n = flat.size();
  return Tensor(Shape{n}, std::move(flat));
}

double outer_gradient_check(const DecoderNet& net, const OuterSample& sample, const InnerConfig& cfg, double step) {
  const Tensor analytic = outer_gradient(net, sample, cfg);
  auto value = [&](const DecoderNet& n) {
    ad::Tape tape;
    BoundDecoder dec = n.bind(tape, false);
    return outer_data_loss(dec, sample, cfg).value().item();
  };
  DecoderNet probe = net;
  Tensor fd(analytic.shape());
  std::size_t flat = 0;
  for (std::size_t p = 0; p < probe.params().size(); ++p) {
    auto& values = probe.params()[p].values();
    for (std::size_t i = 0; i < values.size(); ++i, ++flat) {
      const double orig = values[i];
      values[i] = orig + step;
      const double up = value(probe);
      values[i] = orig - step;
      const double down = value(probe);
      values[i] = orig;
      fd[flat] = (up - down) / (2.0 * step);
    }
  }
  return ad::max_relative_error(analytic, fd);
}

}  // namespace ensers
