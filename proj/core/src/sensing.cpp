#include "ensers/sensing.hpp"

#include <numeric>
#include <random>

#include "ensers/error.hpp"
#include "ensers/io.hpp"

namespace ensers {

IndexList IndexLayout::window(std::size_t start, std::size_t gamma) const { return window(start, gamma, points); }

IndexList IndexLayout::window(std::size_t start, std::size_t gamma, std::size_t omega_eval) const {
  if (start + gamma > steps) {
    throw ShapeError("layout window [" + std::to_string(start) + ", " + std::to_string(start + gamma) +
                     ") exceeds " + std::to_string(steps) + " timesteps");
  }
  std::vector<std::size_t> flat;
  flat.reserve(gamma * variables * count);
  for (std::size_t i = 0; i < gamma; ++i) {
    for (std::size_t m = 0; m < variables; ++m) {
      for (std::size_t j = 0; j < count; ++j) {
        const std::size_t r = at(start + i, m, j);
        if (r >= omega_eval) {
          throw ShapeError("layout index " + std::to_string(r) + " outside grid of " + std::to_string(omega_eval));
        }
        flat.push_back((i * variables + m) * omega_eval + r);
      }
    }
  }
  return make_index(std::move(flat));
}

IndexLayout sample_layout(std::size_t steps, std::size_t variables, std::size_t count, std::size_t points,
                          std::uint64_t seed, bool with_replacement) {
  if (points == 0) throw ConfigError("sample_layout: empty grid");
  if (!with_replacement && count > points) {
    throw ConfigError("sample_layout: " + std::to_string(count) + " locations requested from " +
                      std::to_string(points) + " points without replacement");
  }
  IndexLayout lay{steps, variables, count, points, seed, with_replacement, {}};
  lay.index.reserve(steps * variables * count);
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> pool(points);
  for (std::size_t lm = 0; lm < steps * variables; ++lm) {
    if (with_replacement) {
      std::uniform_int_distribution<std::size_t> pick(0, points - 1);
      for (std::size_t j = 0; j < count; ++j) lay.index.push_back(pick(rng));
      continue;
    }
    std::iota(pool.begin(), pool.end(), std::size_t{0});
    // Partial Fisher-Yates: the first count entries are a uniform draw.
    for (std::size_t j = 0; j < count; ++j) {
      std::uniform_int_distribution<std::size_t> pick(j, points - 1);
      std::swap(pool[j], pool[pick(rng)]);
      lay.index.push_back(pool[j]);
    }
  }
  return lay;
}

IndexLayout full_layout(std::size_t steps, std::size_t variables, std::size_t points) {
  IndexLayout lay{steps, variables, points, points, 0, false, {}};
  lay.index.reserve(steps * variables * points);
  for (std::size_t lm = 0; lm < steps * variables; ++lm) {
    for (std::size_t r = 0; r < points; ++r) lay.index.push_back(r);
  }
  return lay;
}

void save_layout(const std::filesystem::path& path, const IndexLayout& layout) {
  io::json j;
  j["kind"] = "ensers-layout";
  j["L"] = layout.steps;
  j["M"] = layout.variables;
  j["count"] = layout.count;
  j["omega"] = layout.points;
  j["seed"] = layout.seed;
  j["with_replacement"] = layout.with_replacement;
  j["index"] = layout.index;
  io::write_text(path, j.dump() + "\n");
}

IndexLayout load_layout(const std::filesystem::path& path) {
  try {
    const auto j = io::json::parse(io::read_text(path));
    if (j.at("kind").get<std::string>() != "ensers-layout") throw IoError(path.string() + ": not a layout file");
    IndexLayout lay;
    lay.steps = j.at("L").get<std::size_t>();
    lay.variables = j.at("M").get<std::size_t>();
    lay.count = j.at("count").get<std::size_t>();
    lay.points = j.at("omega").get<std::size_t>();
    lay.seed = j.at("seed").get<std::uint64_t>();
    lay.with_replacement = j.at("with_replacement").get<bool>();
    lay.index = j.at("index").get<std::vector<std::size_t>>();
    if (lay.index.size() != lay.steps * lay.variables * lay.count) {
      throw IoError(path.string() + ": index array length does not match L*M*count");
    }
    for (std::size_t r : lay.index) {
      if (r >= lay.points) throw IoError(path.string() + ": index " + std::to_string(r) + " outside grid");
    }
    return lay;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path.string() + ": bad layout file: " + e.what());
  }
}

Tensor measure(const Tensor& z, const IndexLayout& layout, const NoiseSpec& noise) {
  if (z.rank() != 3 || z.dim(0) != layout.steps || z.dim(1) != layout.variables || z.dim(2) != layout.points) {
    throw ShapeError("measure: field " + to_string(z.shape()) + " does not match layout [" +
                     std::to_string(layout.steps) + ", " + std::to_string(layout.variables) + ", " +
                     std::to_string(layout.points) + "]");
  }
  Tensor out(Shape{layout.steps, layout.variables, layout.count});
  std::size_t o = 0;
  for (std::size_t l = 0; l < layout.steps; ++l) {
    for (std::size_t m = 0; m < layout.variables; ++m) {
      for (std::size_t j = 0; j < layout.count; ++j) {
        out[o++] = z[(l * layout.variables + m) * layout.points + layout.at(l, m, j)];
      }
    }
  }
  return add_noise(out, noise);
}

std::size_t chunk_count(std::size_t steps, std::size_t gamma, std::size_t stride) {
  if (gamma == 0 || stride == 0) throw ConfigError("chunk: gamma and z must be positive");
  if (gamma > steps) {
    throw ConfigError("chunk: window of " + std::to_string(gamma) + " states exceeds " + std::to_string(steps) +
                      " timesteps");
  }
  return (steps - gamma) / stride + 1;
}

Tensor time_window(const Tensor& t, std::size_t start, std::size_t gamma) {
  if (t.rank() == 0 || start + gamma > t.dim(0)) throw ShapeError("time_window: range outside tensor");
  Shape shape = t.shape();
  shape[0] = gamma;
  const std::size_t row = t.size() / t.dim(0);
  std::vector<double> v(t.values().begin() + static_cast<std::ptrdiff_t>(start * row),
                        t.values().begin() + static_cast<std::ptrdiff_t>((start + gamma) * row));
  return Tensor(std::move(shape), std::move(v));
}

std::vector<Chunk> chunk(const Tensor& sensors, const Tensor& labels, std::size_t gamma, std::size_t stride) {
  if (sensors.rank() != 3 || labels.rank() != 3 || sensors.dim(0) != labels.dim(0)) {
    throw ShapeError("chunk: sensor " + to_string(sensors.shape()) + " and label " + to_string(labels.shape()) +
                     " arrays must be (L, M, count) with equal L");
  }
  const std::size_t n = chunk_count(sensors.dim(0), gamma, stride);
  std::vector<Chunk> out;
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    out.push_back({k, k * stride, time_window(sensors, k * stride, gamma), time_window(labels, k * stride, gamma)});
  }
  return out;
}

}  // namespace ensers
