#include "run_config.hpp"

#include <set>

#include "ensers/datagen/solvers.hpp"
#include "ensers/error.hpp"
#include "ensers/io.hpp"

namespace ensers::cli {
namespace {

using nlohmann::json;

std::string type_name(const json& v) {
  if (v.is_null()) return "null";
  if (v.is_boolean()) return "boolean";
  if (v.is_number()) return "number";
  if (v.is_string()) return "string";
  if (v.is_array()) return "array";
  return "object";
}

[[noreturn]] void type_error(const std::string& path, const char* expected, const json& v) {
  throw ConfigError(path + ": expected " + expected + ", got " + type_name(v));
}

void read(const json& v, const std::string& path, double& out) {
  if (!v.is_number()) type_error(path, "a number", v);
  out = v.get<double>();
}

void read(const json& v, const std::string& path, std::size_t& out) {
  if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0)) {
    type_error(path, "a non-negative integer", v);
  }
  out = v.get<std::size_t>();
}

void read(const json& v, const std::string& path, bool& out) {
  if (!v.is_boolean()) type_error(path, "a boolean", v);
  out = v.get<bool>();
}

void read(const json& v, const std::string& path, std::string& out) {
  if (!v.is_string()) type_error(path, "a string", v);
  out = v.get<std::string>();
}

void read(const json& v, const std::string& path, std::optional<double>& out) {
  if (v.is_null()) {
    out.reset();
    return;
  }
  double d = 0.0;
  read(v, path, d);
  out = d;
}

template <class T>
void read(const json& v, const std::string& path, std::vector<T>& out) {
  if (!v.is_array()) type_error(path, "an array", v);
  out.clear();
  for (std::size_t i = 0; i < v.size(); ++i) {
    T item{};
    read(v[i], path + "[" + std::to_string(i) + "]", item);
    out.push_back(item);
  }
}

/// One JSON object; every key must be consumed before finish().
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j.is_object()) type_error(path_.empty() ? "config" : path_, "an object", j);
  }

  std::string key_path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  template <class T>
  void get(const std::string& key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it != j_.end()) read(*it, key_path(key), out);
  }

  template <class T>
  void required(const std::string& key, T& out) {
    if (!j_.contains(key)) throw ConfigError(key_path(key) + ": required key missing");
    get(key, out);
  }

  template <class Parse>
  void named(const std::string& key, Parse parse) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    std::string s;
    read(*it, key_path(key), s);
    try {
      parse(s);
    } catch (const ConfigError& e) {
      throw ConfigError(key_path(key) + ": " + e.what());
    }
  }

  const json* child(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) {
        std::string allowed;
        for (const auto& k : seen_) allowed += (allowed.empty() ? "" : ", ") + k;
        throw ConfigError(key_path(it.key()) + ": unknown key (allowed: " + allowed + ")");
      }
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

NetSection parse_net(const json& j) {
  Section s(j, "net");
  NetSection n;
  s.named("mode", [&](const std::string& v) { n.mode = parse_decoder_mode(v); });
  s.get("hidden", n.hidden);
  s.named("activation", [&](const std::string& v) { n.activation = parse_activation(v); });
  s.get("latent", n.latent);
  s.get("seed", n.seed);
  s.finish();
  if (n.latent == 0) throw ConfigError("net.latent: must be >= 1");
  for (std::size_t i = 0; i < n.hidden.size(); ++i) {
    if (n.hidden[i] == 0) throw ConfigError("net.hidden[" + std::to_string(i) + "]: widths must be >= 1");
  }
  return n;
}

TrainConfig parse_train(const json& j) {
  Section s(j, "train");
  TrainConfig t;
  s.get("eta_o", t.eta_o);
  s.get("eta_i0", t.eta_i0);
  s.get("eta_i_slope", t.eta_i_slope);
  s.get("batch", t.batch);
  s.get("epochs", t.epochs);
  s.get("inner_steps", t.inner_steps);
  s.get("zeta0", t.zeta0);
  s.get("zeta_slope", t.zeta_slope);
  s.get("sensors", t.sensors);
  s.get("labels", t.labels);
  s.get("samples", t.samples);
  s.get("chunks", t.chunks);
  s.get("gamma", t.gamma);
  s.get("stride", t.stride);
  s.get("seed", t.seed);
  s.named("optimizer", [&](const std::string& v) { t.optimizer = parse_optimizer(v); });
  s.get("adam_beta1", t.adam_beta1);
  s.get("adam_beta2", t.adam_beta2);
  s.get("adam_eps", t.adam_eps);
  s.get("sensor_snr_db", t.sensor_noise.snr_db);
  s.get("first_order", t.first_order);
  s.get("divergence_limit", t.divergence_limit);
  s.get("threads", t.threads);
  s.get("collocation", t.collocation);
  s.finish();
  t.sensor_noise.seed = t.seed + 7;
  t.validate();
  return t;
}

TestConfig parse_test(const json& j) {
  Section s(j, "test");
  TestConfig t;
  s.get("eta_i", t.eta_i);
  s.get("inner_steps", t.inner_steps);
  s.get("sensors", t.sensor_counts);
  s.get("snr_db", t.snr_db);
  s.get("samples", t.samples);
  s.get("chunks", t.chunks);
  s.get("seed", t.seed);
  s.get("gamma_star", t.gamma_star);
  s.named("loss", [&](const std::string& v) { t.loss = parse_inner_loss(v); });
  s.finish();
  t.validate();
  return t;
}

}  // namespace

GenConfig parse_gen_config(const json& j, const std::string& path, std::optional<System> system) {
  Section s(j, path);
  GenConfig g;
  if (system) g.system = *system;
  s.named("system", [&](const std::string& v) { g.system = parse_system(v); });
  s.get("seed", g.seed);
  s.get("grid", g.grid);
  s.get("ny", g.ny);
  s.get("nu", g.nu);
  s.get("dt", g.dt);
  if (const json* v = s.child("steps")) {
    std::size_t n = 0;
    read(*v, s.key_path("steps"), n);
    g.steps = n;
  }
  if (const json* v = s.child("output_every")) {
    std::size_t n = 0;
    read(*v, s.key_path("output_every"), n);
    g.output_every = n;
  }
  s.finish();
  if (g.nu && g.system != System::Burgers2d) throw ConfigError(s.key_path("nu") + ": only burgers2d has a viscosity");
  if (g.ny && g.system != System::NavierStokes2d) {
    throw ConfigError(s.key_path("ny") + ": only navier-stokes-2d has a separate y resolution");
  }
  if (g.output_every && g.system == System::NavierStokes2d) {
    throw ConfigError(s.key_path("output_every") + ": navier-stokes-2d writes every step (dt is the output interval)");
  }
  return g;
}

DecoderNet RunConfig::make_net(const SnapshotSet& data) const {
  DecoderLayout lay;
  lay.mode = net.mode;
  lay.gamma = train.gamma;
  lay.variables = data.variables();
  lay.points = data.points();
  lay.latent = net.latent;
  lay.coord_dim = net.mode == DecoderMode::Continuous ? (data.grid.two_d() ? 2 : 1) : 0;
  std::vector<std::size_t> widths{lay.input_width()};
  widths.insert(widths.end(), net.hidden.begin(), net.hidden.end());
  widths.push_back(lay.output_width());
  return DecoderNet({widths, net.activation, net.seed}, lay);
}

void apply_override(json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "': expected key.path=value");
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  json* node = &j;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ConfigError("override '" + assignment + "': empty key component");
    if (!node->is_object()) throw ConfigError("override '" + assignment + "': " + key.substr(0, start) + " is not an object");
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    node = &(*node)[part];
    if (node->is_null()) *node = json::object();
    start = dot + 1;
  }
}

RunConfig parse_run_config(const json& j) {
  Section s(j, "");
  RunConfig rc;
  rc.raw = j;
  s.named("system", [&](const std::string& v) { rc.system = parse_system(v); });
  if (!j.contains("system")) throw ConfigError("system: required key missing");
  std::string dataset, output;
  s.required("dataset", dataset);
  s.required("output_dir", output);
  rc.dataset = dataset;
  rc.output_dir = output;
  s.get("checkpoint_every", rc.checkpoint_every);
  if (const json* g = s.child("gen")) {
    rc.gen = parse_gen_config(*g, "gen", rc.system);
    if (rc.gen->system != rc.system) throw ConfigError("gen.system: differs from the run's system");
  }
  if (const json* n = s.child("net")) rc.net = parse_net(*n);
  if (const json* t = s.child("train")) rc.train = parse_train(*t);
  if (const json* t = s.child("test")) rc.test = parse_test(*t);
  s.finish();
  if (rc.checkpoint_every == 0) throw ConfigError("checkpoint_every: must be >= 1");
  if (rc.net.mode == DecoderMode::Continuous && system_variables(rc.system) != 1) {
    throw ConfigError("net.mode: continuous decoders support single-variable systems only");
  }
  return rc;
}

RunConfig load_run_config(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
  json j = json::parse(io::read_text(path), nullptr, false, true);
  if (j.is_discarded()) throw ConfigError(path.string() + ": not valid JSON");
  for (const auto& o : overrides) apply_override(j, o);
  return parse_run_config(j);
}

SnapshotSet generate(const GenConfig& cfg) {
  switch (cfg.system) {
    case System::Burgers2d: {
      BurgersRun run;
      if (cfg.nu) run.nu = *cfg.nu;
      if (cfg.dt) run.dt = *cfg.dt;
      if (cfg.steps) run.steps = *cfg.steps;
      if (cfg.output_every) run.output_every = *cfg.output_every;
      Grid g = burgers_grid(cfg.grid ? cfg.grid : 32);
      return solve_burgers(burgers_ic(g, cfg.seed), g, run, cfg.seed);
    }
    case System::AllenCahn: {
      AllenCahnRun run;
      if (cfg.dt) run.dt = *cfg.dt;
      if (cfg.steps) run.steps = *cfg.steps;
      if (cfg.output_every) run.output_every = *cfg.output_every;
      Grid g = allen_cahn_grid(cfg.grid ? cfg.grid : 128);
      SnapshotSet s = solve_allen_cahn(allen_cahn_ic(g), g, run);
      s.seed = cfg.seed;
      return s;
    }
    case System::ConvDiff: {
      ConvDiffRun run;
      if (cfg.dt) run.dt = *cfg.dt;
      if (cfg.steps) run.steps = *cfg.steps;
      if (cfg.output_every) run.output_every = *cfg.output_every;
      Grid g = conv_diff_grid(cfg.grid ? cfg.grid : 64);
      return solve_conv_diff(conv_diff_ic(g, cfg.seed), g, run, cfg.seed);
    }
    case System::NavierStokes2d:
      return vortex_street(cfg.grid ? cfg.grid : 64, cfg.ny ? cfg.ny : 32, cfg.steps.value_or(50), cfg.dt.value_or(0.05),
                           cfg.seed);
  }
  throw ConfigError("unsupported system");
}

}  // namespace ensers::cli
