#include "ensers/decoder.hpp"

#include <cmath>
#include <random>

#include "ensers/error.hpp"
#include "ensers/io.hpp"

namespace ensers {

Activation parse_activation(const std::string& name) {
  if (name == "softplus") return Activation::Softplus;
  if (name == "tanh") return Activation::Tanh;
  throw ConfigError("unknown activation '" + name + "' (expected softplus or tanh)");
}

std::string to_string(Activation a) { return a == Activation::Softplus ? "softplus" : "tanh"; }

DecoderMode parse_decoder_mode(const std::string& name) {
  if (name == "discrete") return DecoderMode::Discrete;
  if (name == "continuous") return DecoderMode::Continuous;
  throw ConfigError("unknown decoder mode '" + name + "' (expected discrete or continuous)");
}

std::string to_string(DecoderMode m) { return m == DecoderMode::Discrete ? "discrete" : "continuous"; }

DecoderNet::DecoderNet(NetConfig config, DecoderLayout layout) : config_(std::move(config)), layout_(layout) {
  const auto& w = config_.widths;
  if (w.size() < 3) throw ConfigError("decoder needs at least one hidden layer");
  for (std::size_t width : w) {
    if (width == 0) throw ConfigError("decoder layer width must be positive");
  }
  if (layout_.mode == DecoderMode::Continuous && layout_.coord_dim == 0) {
    throw ConfigError("continuous decoder needs a coordinate dimension");
  }
  if (w.front() != layout_.input_width()) {
    throw ConfigError("decoder input width " + std::to_string(w.front()) + " does not match " +
                      std::to_string(layout_.input_width()) + " for " + to_string(layout_.mode) + " mode");
  }
  if (w.back() != layout_.output_width()) {
    throw ConfigError("decoder output width " + std::to_string(w.back()) + " does not match " +
                      std::to_string(layout_.output_width()) + " for " + to_string(layout_.mode) + " mode");
  }
  std::mt19937_64 rng(config_.seed);
  for (std::size_t l = 0; l + 1 < w.size(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(w[l]));
    std::uniform_real_distribution<double> u(-bound, bound);
    Tensor weight(Shape{w[l], w[l + 1]});
    for (double& v : weight.values()) v = u(rng);
    params_.push_back(std::move(weight));
    params_.emplace_back(Shape{w[l + 1]}, 0.0);
  }
}

std::size_t DecoderNet::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.size();
  return n;
}

BoundDecoder DecoderNet::bind(ad::Tape& tape, bool trainable) const {
  std::vector<ad::Var> vars;
  vars.reserve(params_.size());
  for (std::size_t i = 0; i < params_.size(); ++i) {
    vars.push_back(trainable ? tape.leaf(params_[i], (i % 2 ? "b" : "W") + std::to_string(i / 2))
                             : tape.constant(params_[i]));
  }
  return BoundDecoder(*this, std::move(vars));
}

ad::Var BoundDecoder::forward(ad::Var rows) const {
  const Activation act = net_->config().activation;
  ad::Var h = rows;
  const std::size_t layers = params_.size() / 2;
  for (std::size_t l = 0; l < layers; ++l) {
    h = ad::add_row_broadcast(ad::matmul(h, params_[2 * l]), params_[2 * l + 1]);
    if (l + 1 < layers) h = act == Activation::Softplus ? ad::softplus(h) : ad::tanh(h);
  }
  return h;
}

ad::Var BoundDecoder::decode_discrete(ad::Var xi) const {
  const auto& lay = net_->layout();
  if (lay.mode != DecoderMode::Discrete) throw ConfigError("decode_discrete called on a continuous decoder");
  if (xi.value().size() != lay.latent) {
    throw ShapeError("decode_discrete: reduced state has " + std::to_string(xi.value().size()) + " entries, expected " +
                     std::to_string(lay.latent));
  }
  ad::Var out = forward(ad::reshape(xi, {1, lay.latent}));
  return ad::reshape(out, {lay.gamma, lay.variables, lay.points});
}

ad::Var BoundDecoder::decode_continuous(ad::Var xi, ad::Var coords) const {
  const auto& lay = net_->layout();
  if (lay.mode != DecoderMode::Continuous) throw ConfigError("decode_continuous called on a discrete decoder");
  if (xi.value().size() != lay.latent) {
    throw ShapeError("decode_continuous: reduced state has " + std::to_string(xi.value().size()) +
                     " entries, expected " + std::to_string(lay.latent));
  }
  if (coords.value().rank() != 2 || coords.value().dim(1) != lay.coord_dim) {
    throw ShapeError("decode_continuous: coordinates " + to_string(coords.shape()) + " need " +
                     std::to_string(lay.coord_dim) + " columns");
  }
  const std::size_t n = coords.value().dim(0);
  ad::Var rows = ad::concat_cols(ad::repeat_rows(ad::reshape(xi, {lay.latent}), n), coords);
  ad::Var out = ad::transpose(forward(rows));
  return ad::reshape(out, {lay.gamma, lay.variables, n});
}

ad::Var BoundDecoder::decode(ad::Var xi, const ad::Var* coords) const {
  if (net_->layout().mode == DecoderMode::Discrete) return decode_discrete(xi);
  if (coords == nullptr) throw ConfigError("continuous decoder needs coordinates");
  return decode_continuous(xi, *coords);
}

void DecoderNet::save(const std::filesystem::path& path, const nlohmann::json& extra) const {
  io::json h;
  h["kind"] = "ensers-checkpoint";
  h["widths"] = config_.widths;
  h["activation"] = to_string(config_.activation);
  h["seed"] = config_.seed;
  h["mode"] = to_string(layout_.mode);
  h["gamma"] = layout_.gamma;
  h["M"] = layout_.variables;
  h["omega"] = layout_.points;
  h["latent"] = layout_.latent;
  h["coord_dim"] = layout_.coord_dim;
  io::json shapes = io::json::array();
  std::vector<double> flat;
  flat.reserve(parameter_count());
  for (const auto& p : params_) {
    shapes.push_back(p.shape());
    flat.insert(flat.end(), p.values().begin(), p.values().end());
  }
  h["shapes"] = shapes;
  h["extra"] = extra;
  io::write_blob(path, h, flat);
}

DecoderNet DecoderNet::load(const std::filesystem::path& path, nlohmann::json* extra) {
  auto blob = io::read_blob(path);
  const auto& h = blob.header;
  try {
    if (h.at("kind").get<std::string>() != "ensers-checkpoint") throw IoError(path.string() + ": not a checkpoint");
    NetConfig cfg;
    cfg.widths = h.at("widths").get<std::vector<std::size_t>>();
    cfg.activation = parse_activation(h.at("activation").get<std::string>());
    cfg.seed = h.at("seed").get<std::uint64_t>();
    DecoderLayout lay;
    lay.mode = parse_decoder_mode(h.at("mode").get<std::string>());
    lay.gamma = h.at("gamma").get<std::size_t>();
    lay.variables = h.at("M").get<std::size_t>();
    lay.points = h.at("omega").get<std::size_t>();
    lay.latent = h.at("latent").get<std::size_t>();
    lay.coord_dim = h.at("coord_dim").get<std::size_t>();
    DecoderNet net(cfg, lay);
    const auto shapes = h.at("shapes").get<std::vector<Shape>>();
    if (shapes.size() != net.params_.size()) throw IoError(path.string() + ": parameter tensor count mismatch");
    std::size_t offset = 0;
    for (std::size_t i = 0; i < shapes.size(); ++i) {
      if (shapes[i] != net.params_[i].shape()) {
        throw IoError(path.string() + ": parameter " + std::to_string(i) + " has shape " + to_string(shapes[i]) +
                      ", architecture expects " + to_string(net.params_[i].shape()));
      }
      const std::size_t n = net.params_[i].size();
      if (offset + n > blob.payload.size()) throw IoError(path.string() + ": payload too short");
      std::copy(blob.payload.begin() + static_cast<std::ptrdiff_t>(offset),
                blob.payload.begin() + static_cast<std::ptrdiff_t>(offset + n), net.params_[i].values().begin());
      offset += n;
    }
    if (offset != blob.payload.size()) throw IoError(path.string() + ": payload longer than parameters");
    if (extra != nullptr) *extra = h.value("extra", nlohmann::json::object());
    return net;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path.string() + ": bad checkpoint header: " + e.what());
  }
}

}  // namespace ensers
