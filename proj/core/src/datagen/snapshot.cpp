#include "ensers/datagen/snapshot.hpp"

#include "ensers/error.hpp"
#include "ensers/io.hpp"
#include "ensers/sensing.hpp"

namespace ensers {

void SnapshotSet::validate() const {
  if (z.rank() != 3) throw ShapeError("snapshots: Z must be (L, M, omega), got " + to_string(z.shape()));
  if (z.dim(1) != system_variables(system)) {
    throw ShapeError("snapshots: " + to_string(system) + " has " + std::to_string(system_variables(system)) +
                     " variables, Z has " + std::to_string(z.dim(1)));
  }
  if (z.dim(2) != grid.points()) {
    throw ShapeError("snapshots: omega = " + std::to_string(z.dim(2)) + " but the grid has " +
                     std::to_string(grid.points()) + " points");
  }
  if (z.dim(0) == 0) throw ShapeError("snapshots: no timesteps");
  if (!(dt_output > 0.0)) throw ConfigError("snapshots: output interval must be positive");
  if (!z.all_finite()) throw NonFiniteError("snapshots: non-finite values in Z");
}

Tensor SnapshotSet::window(std::size_t start, std::size_t count) const { return time_window(z, start, count); }

nlohmann::json grid_to_json(const Grid& g) {
  return {{"nx", g.nx}, {"ny", g.ny}, {"dx", g.dx}, {"dy", g.dy}, {"x0", g.x0}, {"y0", g.y0}, {"periodic", g.periodic}};
}

Grid grid_from_json(const nlohmann::json& j) {
  Grid g;
  g.nx = j.at("nx").get<std::size_t>();
  g.ny = j.at("ny").get<std::size_t>();
  g.dx = j.at("dx").get<double>();
  g.dy = j.at("dy").get<double>();
  g.x0 = j.at("x0").get<double>();
  g.y0 = j.at("y0").get<double>();
  g.periodic = j.at("periodic").get<bool>();
  return g;
}

void save_snapshots(const std::filesystem::path& path, const SnapshotSet& set) {
  set.validate();
  io::json h;
  h["kind"] = "ensers-snapshots";
  h["system"] = to_string(set.system);
  h["L"] = set.steps();
  h["M"] = set.variables();
  h["omega"] = set.points();
  h["grid"] = grid_to_json(set.grid);
  h["dt_output"] = set.dt_output;
  h["periodic"] = set.grid.periodic;
  h["seed"] = set.seed;
  h["params"] = set.params;
  io::write_blob(path, h, set.z.values());
}

SnapshotSet load_snapshots(const std::filesystem::path& path) {
  auto blob = io::read_blob(path);
  const auto& h = blob.header;
  SnapshotSet set;
  try {
    if (h.at("kind").get<std::string>() != "ensers-snapshots") throw IoError(path.string() + ": not a snapshot file");
    set.system = parse_system(h.at("system").get<std::string>());
    const auto L = h.at("L").get<std::size_t>();
    const auto M = h.at("M").get<std::size_t>();
    const auto omega = h.at("omega").get<std::size_t>();
    if (L * M * omega != blob.payload.size()) {
      throw IoError(path.string() + ": header L*M*omega = " + std::to_string(L * M * omega) + " but payload has " +
                    std::to_string(blob.payload.size()) + " values");
    }
    set.grid = grid_from_json(h.at("grid"));
    set.dt_output = h.at("dt_output").get<double>();
    set.seed = h.at("seed").get<std::uint64_t>();
    set.params = h.value("params", nlohmann::json::object());
    set.z = Tensor(Shape{L, M, omega}, std::move(blob.payload));
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path.string() + ": bad snapshot header: " + e.what());
  }
  try {
    set.validate();
  } catch (const Error& e) {
    throw IoError(path.string() + ": " + e.what());
  }
  return set;
}

double snapshot_residual(const SnapshotSet& set, std::size_t gamma, const RhsSpec& spec) {
  set.validate();
  const auto tab = collocation_tableau(gamma - 2);
  // Stage c_i sits i output intervals after V^n, so the step spans gamma - 1 intervals.
  const double dt = static_cast<double>(gamma - 1) * set.dt_output;
  const std::size_t windows = chunk_count(set.steps(), gamma, 1);
  double loss = 0.0, energy = 0.0;
  for (std::size_t l = 0; l < windows; ++l) {
    ad::Tape tape;
    loss += physics_loss_discrete(tape.constant(set.window(l, gamma)), dt, tab, spec, set.grid).value().item();
    for (std::size_t i = 0; i < set.variables() * set.points(); ++i) {
      const double v = set.z[l * set.variables() * set.points() + i];
      energy += v * v;
    }
  }
  return loss / energy;
}

}  // namespace ensers
