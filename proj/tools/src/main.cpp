#include <chrono>
#include <cstdio>
#include <ctime>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "ensers/error.hpp"
#include "ensers/io.hpp"
#include "run_config.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ensers;
using namespace ensers::cli;

namespace {

constexpr int kComputeFailure = 1;
constexpr int kConfigFailure = 2;

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

SnapshotSet load_dataset(const RunConfig& rc) {
  if (!fs::is_regular_file(rc.dataset)) {
    throw IoError("dataset " + rc.dataset.string() + " does not exist (run `ensers gen --config ...` first)");
  }
  SnapshotSet data = load_snapshots(rc.dataset);
  if (data.system != rc.system) {
    throw ConfigError("dataset " + rc.dataset.string() + " holds " + to_string(data.system) + ", config says " +
                      to_string(rc.system));
  }
  return data;
}

json seeds_json(const RunConfig& rc) {
  return {{"net", rc.net.seed}, {"train", rc.train.seed}, {"test", rc.test.seed}};
}

void write_manifest(const fs::path& path, const std::string& command, const RunConfig& rc, json outputs) {
  json m = {{"command", command},
            {"tool_version", "0.1.0"},
            {"config", rc.raw},
            {"seeds", seeds_json(rc)},
            {"dataset", {{"path", rc.dataset.string()}, {"digest", io::file_digest(rc.dataset)}}},
            {"outputs", std::move(outputs)},
            {"created", utc_now()}};
  io::write_text(path, m.dump(2) + "\n");
}

void write_loss_csv(const fs::path& path, const TrainState& st) {
  std::ostringstream os;
  os.precision(17);
  os << "epoch,loss,data_loss,physics_loss\n";
  for (std::size_t e = 0; e < st.loss.size(); ++e) {
    os << e << ',' << st.loss[e] << ',' << st.data_loss[e] << ',' << st.physics_loss[e] << '\n';
  }
  io::write_text(path, os.str());
}

bool same_architecture(const DecoderNet& a, const DecoderNet& b) {
  const auto &la = a.layout(), &lb = b.layout();
  return a.config().widths == b.config().widths && a.config().activation == b.config().activation &&
         la.mode == lb.mode && la.gamma == lb.gamma && la.variables == lb.variables && la.points == lb.points &&
         la.latent == lb.latent && la.coord_dim == lb.coord_dim;
}

int cmd_gen(const std::string& system, std::uint64_t seed, bool seed_given, const std::string& config,
            const std::vector<std::string>& overrides, std::string out) {
  GenConfig g;
  if (!config.empty()) {
    RunConfig rc = load_run_config(config, overrides);
    g = rc.gen.value_or(GenConfig{});
    g.system = rc.system;
    if (!system.empty() && parse_system(system) != rc.system) {
      throw ConfigError("system argument '" + system + "' differs from the config's " + to_string(rc.system));
    }
    if (out.empty()) out = rc.dataset.string();
  } else {
    if (system.empty()) throw ConfigError("gen: give a system or --config");
    const System sys = parse_system(system);
    json j = json::object();
    for (const auto& o : overrides) apply_override(j, o);
    g = parse_gen_config(j, "--set", sys);
    g.system = sys;
  }
  if (seed_given) g.seed = seed;
  if (out.empty()) out = to_string(g.system) + "-seed" + std::to_string(g.seed) + ".snap";
  SnapshotSet data = generate(g);
  const fs::path path(out);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  save_snapshots(path, data);
  std::cout << "wrote " << path.string() << ": system=" << to_string(data.system) << " L=" << data.steps()
            << " M=" << data.variables() << " omega=" << data.points() << " digest=" << io::file_digest(path) << "\n";
  return 0;
}

int cmd_train(const std::string& config, const std::vector<std::string>& overrides, bool resume) {
  RunConfig rc = load_run_config(config, overrides);
  SnapshotSet data = load_dataset(rc);
  DecoderNet fresh = rc.make_net(data);
  const TrainLayouts layouts = make_train_layouts(data, rc.train);

  fs::create_directories(rc.output_dir);
  const fs::path ckpt = rc.output_dir / "checkpoint.bin";
  TrainState state;
  DecoderNet net = fresh;
  if (resume && fs::exists(ckpt)) {
    net = load_training(ckpt, state);
    if (!same_architecture(net, fresh)) {
      throw ConfigError("resume: " + ckpt.string() + " was trained with a different architecture");
    }
    std::cout << "resuming from epoch " << state.epoch << "\n";
  } else if (resume) {
    std::cout << "no checkpoint at " << ckpt.string() << "; starting from epoch 0\n";
  }
  save_layout(rc.output_dir / "sensors.json", layouts.sensors);
  save_layout(rc.output_dir / "labels.json", layouts.labels);

  auto persist = [&](const DecoderNet& n, const TrainState& s) {
    save_training(ckpt, n, s, {{"system", to_string(rc.system)}});
    write_loss_csv(rc.output_dir / "loss.csv", s);
  };
  const auto t0 = std::chrono::steady_clock::now();
  try {
    train(net, data, layouts, rc.train, state, [&](const DecoderNet& n, const TrainState& s) {
      if (s.epoch % rc.checkpoint_every == 0 || s.epoch == rc.train.epochs) {
        persist(n, s);
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::cout << "epoch " << s.epoch << "/" << rc.train.epochs << " loss " << s.loss.back() << " (data "
                  << s.data_loss.back() << ", physics " << s.physics_loss.back() << ") " << secs << "s\n"
                  << std::flush;
      }
      return true;
    });
  } catch (const Error&) {
    std::cerr << "training aborted; the last checkpoint (epoch " << state.epoch - state.epoch % rc.checkpoint_every
              << ") is kept\n";
    throw;
  }
  persist(net, state);
  write_manifest(rc.output_dir / "train_manifest.json", "train", rc,
                 {{"checkpoint", {{"path", ckpt.string()}, {"digest", io::file_digest(ckpt)}}},
                  {"epochs", state.epoch},
                  {"final_loss", state.loss.empty() ? json() : json(state.loss.back())}});
  std::cout << "wrote " << ckpt.string() << "\n";
  return 0;
}

int cmd_test(const std::string& config, const std::vector<std::string>& overrides, std::string checkpoint) {
  RunConfig rc = load_run_config(config, overrides);
  SnapshotSet data = load_dataset(rc);
  const fs::path ckpt = checkpoint.empty() ? rc.output_dir / "checkpoint.bin" : fs::path(checkpoint);
  if (!fs::is_regular_file(ckpt)) throw IoError("checkpoint " + ckpt.string() + " does not exist");
  DecoderNet net = DecoderNet::load(ckpt);
  if (net.layout().gamma != rc.train.gamma) {
    throw ConfigError("checkpoint gamma " + std::to_string(net.layout().gamma) + " differs from train.gamma " +
                      std::to_string(rc.train.gamma));
  }
  const Tensor baseline =
      baseline_field(data, train_chunk_indices(data, rc.train), rc.train.gamma, rc.train.stride);
  ErrorReport report = test(net, data, rc.test, rc.train.stride, baseline);

  fs::create_directories(rc.output_dir);
  const fs::path csv = rc.output_dir / "report.csv", summary = rc.output_dir / "report.json";
  write_report(report, csv, summary);
  write_manifest(rc.output_dir / "test_manifest.json", "test", rc,
                 {{"checkpoint", {{"path", ckpt.string()}, {"digest", io::file_digest(ckpt)}}},
                  {"report_csv", {{"path", csv.string()}, {"digest", io::file_digest(csv)}}},
                  {"report_json", {{"path", summary.string()}, {"digest", io::file_digest(summary)}}}});
  std::cout << format_summary(report.summary());
  if (report.failures() > 0) {
    std::cerr << "warning: " << report.failures() << " of " << report.rows.size()
              << " rows failed (inner loop diverged); recorded as nan\n";
  }
  return 0;
}

int cmd_report(const std::string& path) {
  const fs::path p(path);
  json summary;
  if (p.extension() == ".json") {
    summary = json::parse(io::read_text(p), nullptr, false);
    if (summary.is_discarded() || !summary.contains("cells")) throw IoError(path + ": not a report summary");
  } else {
    ErrorReport r = read_report_csv(p);
    if (r.rows.empty()) throw IoError(path + ": report has no rows");
    summary = r.summary();
  }
  std::cout << format_summary(summary);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ENSERS sparse-sensor state estimation"};
  app.require_subcommand(1);

  std::string gen_system, gen_config, gen_out;
  std::uint64_t gen_seed = 0;
  std::vector<std::string> gen_sets;
  auto* gen = app.add_subcommand("gen", "Simulate a trajectory and write a snapshot file");
  gen->add_option("system", gen_system, "burgers2d, navier-stokes-2d, allen-cahn or conv-diff");
  auto* seed_opt = gen->add_option("--seed", gen_seed, "Initial-condition seed");
  gen->add_option("-c,--config", gen_config, "Run config; uses its gen section and dataset path");
  gen->add_option("-o,--out", gen_out, "Output snapshot file");
  gen->add_option("--set", gen_sets, "Override key.path=value")->take_all();

  std::string config, checkpoint, report_path;
  std::vector<std::string> sets;
  bool resume = false;
  auto* tr = app.add_subcommand("train", "Train a decoder from a run config");
  tr->add_option("config", config, "Run config (JSON)")->required();
  tr->add_option("--set", sets, "Override key.path=value")->take_all();
  tr->add_flag("--resume", resume, "Continue from the checkpoint in output_dir");

  auto* te = app.add_subcommand("test", "Evaluate a checkpoint on fresh sensor layouts");
  te->add_option("config", config, "Run config (JSON)")->required();
  te->add_option("--set", sets, "Override key.path=value")->take_all();
  te->add_option("--checkpoint", checkpoint, "Checkpoint (default: output_dir/checkpoint.bin)");

  auto* rep = app.add_subcommand("report", "Print the summary table of a report");
  rep->add_option("report", report_path, "report.csv or report.json")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigFailure;
  }

  try {
    if (gen->parsed()) return cmd_gen(gen_system, gen_seed, seed_opt->count() > 0, gen_config, gen_sets, gen_out);
    if (tr->parsed()) return cmd_train(config, sets, resume);
    if (te->parsed()) return cmd_test(config, sets, checkpoint);
    return cmd_report(report_path);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigFailure;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kConfigFailure;
  } catch (const ShapeError& e) {
    std::cerr << "shape error: " << e.what() << "\n";
    return kConfigFailure;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kConfigFailure;
  } catch (const Error& e) {
    std::cerr << "compute failure: " << e.what() << "\n";
    return kComputeFailure;
  } catch (const std::exception& e) {
    std::cerr << "compute failure: " << e.what() << "\n";
    return kComputeFailure;
  }
}
