#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>

#include "ensers/autodiff/gradient.hpp"
#include "ensers/error.hpp"
#include "ensers/harness.hpp"
#include "ensers/io.hpp"

using namespace ensers;

namespace {

// Smooth travelling waves on a 16-point periodic line.
SnapshotSet tiny_data(std::size_t steps = 12) {
  SnapshotSet s;
  s.system = System::AllenCahn;
  s.grid.nx = 16;
  s.grid.dx = 2.0 / 16.0;
  s.grid.x0 = -1.0;
  s.dt_output = 0.02;
  s.z = Tensor(Shape{steps, 1, 16});
  for (std::size_t l = 0; l < steps; ++l) {
    for (std::size_t r = 0; r < 16; ++r) {
      const double x = s.grid.x(r);
      s.z[l * 16 + r] = 0.5 * std::sin(std::numbers::pi * x + 0.2 * static_cast<double>(l)) +
                        0.3 * std::cos(2.0 * std::numbers::pi * x - 0.1 * static_cast<double>(l)) + 0.1;
    }
  }
  return s;
}

DecoderNet tiny_net(std::size_t gamma, std::uint64_t seed = 0, DecoderMode mode = DecoderMode::Discrete) {
  DecoderLayout lay{mode, gamma, 1, 16, 2, mode == DecoderMode::Continuous ? 1u : 0u};
  return DecoderNet({{lay.input_width(), 12, lay.output_width()}, Activation::Tanh, seed}, lay);
}

TrainConfig tiny_config() {
  TrainConfig c;
  c.eta_o = 0.05;
  c.eta_i0 = 0.5;
  c.eta_i_slope = 0.0;
  c.batch = 4;
  c.epochs = 10;
  c.inner_steps = 2;
  c.zeta0 = 0.0;
  c.zeta_slope = 0.0;
  c.sensors = 16;
  c.labels = 16;
  c.samples = 4;
  c.gamma = 3;
  c.stride = 2;
  c.seed = 0;
  return c;
}

std::filesystem::path temp_dir(const std::string& name) {
  auto d = std::filesystem::temp_directory_path() / ("ensers_harness_" + name);
  std::filesystem::remove_all(d);
  std::filesystem::create_directories(d);
  return d;
}

std::vector<double> flat_params(const DecoderNet& net) {
  std::vector<double> out;
  for (const auto& p : net.params()) out.insert(out.end(), p.values().begin(), p.values().end());
  return out;
}

}  // namespace

TEST(Schedule, EpochZeroIsExact) {
  TrainConfig c;
  c.eta_i0 = 0.1;
  c.zeta0 = 0.005;
  EXPECT_EQ(c.eta_i(0), 0.1);
  EXPECT_EQ(c.zeta(0), 0.005);
}

TEST(Schedule, AffineInEpoch) {
  TrainConfig c;
  c.eta_i0 = 0.1;
  c.eta_i_slope = 0.006;
  c.zeta0 = 0.005;
  c.zeta_slope = 1e-4;
  for (std::size_t e : {1u, 2u, 3u}) {
    EXPECT_NEAR(c.eta_i(e) - c.eta_i(e - 1), 0.006, 1e-15);
    EXPECT_NEAR(c.zeta(e) - c.zeta(e - 1), 1e-4, 1e-15);
  }
  EXPECT_NEAR(c.eta_i(3), 0.118, 1e-15);
}

TEST(TrainConfigTest, RejectsInvalid) {
  auto bad = [](auto mutate) {
    TrainConfig c = tiny_config();
    mutate(c);
    EXPECT_THROW(c.validate(), ConfigError);
  };
  bad([](TrainConfig& c) { c.batch = 0; });
  bad([](TrainConfig& c) { c.epochs = 0; });
  bad([](TrainConfig& c) { c.inner_steps = 0; });
  bad([](TrainConfig& c) { c.eta_o = 0.0; });
  bad([](TrainConfig& c) { c.eta_i0 = -1.0; });
  bad([](TrainConfig& c) { c.labels = 0; });
  EXPECT_NO_THROW(tiny_config().validate());
}

TEST(LabelProject, FullLayoutIsIdentity) {
  ad::Tape tape;
  Tensor d(Shape{3, 1, 16});
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = static_cast<double>(i) * 0.5 - 3.0;
  auto full = full_layout(10, 1, 16);
  ad::Var y = label_project(tape.constant(d), full, 4, 3);
  EXPECT_EQ(y.value().values(), d.values());
}

TEST(LabelProject, EmptyLabelsRejected) {
  ad::Tape tape;
  IndexLayout empty{10, 1, 0, 16, 0, false, {}};
  EXPECT_THROW(label_project(tape.constant(Tensor(Shape{3, 1, 16})), empty, 0, 3), ConfigError);
}

TEST(LabelProject, GradientTouchesOnlyLabelCells) {
  // Sensors on even points, labels on odd points: the data-loss gradient
  // w.r.t. the decoded block must vanish exactly off the label cells.
  IndexLayout labels{4, 1, 3, 16, 0, false, {}};
  for (std::size_t l = 0; l < 4; ++l) {
    for (std::size_t j : {1u, 7u, 13u}) labels.index.push_back(j);
  }
  ad::Tape tape;
  Tensor dv(Shape{2, 1, 16});
  for (std::size_t i = 0; i < dv.size(); ++i) dv[i] = std::sin(static_cast<double>(i));
  ad::Var d = tape.leaf(dv);
  ad::Var loss = ad::mse(label_project(d, labels, 1, 2), tape.constant(Tensor(Shape{2, 1, 3}, 0.25)));
  Tensor g = ad::gradient(loss, d);
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t r = 0; r < 16; ++r) {
      const bool labelled = r == 1 || r == 7 || r == 13;
      const double expect = labelled ? 2.0 * (dv[i * 16 + r] - 0.25) / 6.0 : 0.0;
      EXPECT_NEAR(g[i * 16 + r], expect, 1e-15) << i << "," << r;
    }
  }
}

TEST(RelativeError, IdentityAndZeroPrediction) {
  std::vector<double> j{1.0, -2.0, 0.5};
  std::vector<double> zero(3, 0.0);
  EXPECT_EQ(relative_error(j, j), 0.0);
  EXPECT_DOUBLE_EQ(relative_error(zero, j), 1.0);
  EXPECT_THROW(relative_error(j, zero), NonFiniteError);
}

TEST(Train, LossStrictlyDecreasesOnTinyInstance) {
  SnapshotSet data = tiny_data();
  TrainConfig cfg = tiny_config();
  DecoderNet net = tiny_net(cfg.gamma);
  TrainLayouts lay{full_layout(data.steps(), 1, 16), full_layout(data.steps(), 1, 16)};
  TrainState st;
  train(net, data, lay, cfg, st);
  ASSERT_EQ(st.loss.size(), 10u);
  for (std::size_t e = 1; e < st.loss.size(); ++e) EXPECT_LT(st.loss[e], st.loss[e - 1]) << "epoch " << e;
}

TEST(Train, BitIdenticalAcrossRunsAndThreadCounts) {
  SnapshotSet data = tiny_data();
  TrainConfig cfg = tiny_config();
  cfg.batch = 2;
  cfg.sensors = 4;
  cfg.labels = 6;
  cfg.zeta0 = 1e-4;
  cfg.epochs = 3;
  auto run = [&](std::size_t threads) {
    TrainConfig c = cfg;
    c.threads = threads;
    DecoderNet net = tiny_net(c.gamma);
    TrainState st;
    train(net, data, make_train_layouts(data, c), c, st);
    return std::make_pair(flat_params(net), st.loss);
  };
  auto a = run(1);
  auto b = run(1);
  auto c = run(3);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a, c);
}

TEST(Train, ResumeMatchesUninterruptedRun) {
  SnapshotSet data = tiny_data();
  TrainConfig cfg = tiny_config();
  cfg.optimizer = Optimizer::Adam;
  cfg.eta_o = 1e-2;
  cfg.sensors = 5;
  cfg.labels = 8;
  cfg.zeta0 = 1e-4;
  cfg.zeta_slope = 1e-5;
  cfg.eta_i_slope = 0.01;
  cfg.epochs = 4;
  const auto layouts = make_train_layouts(data, cfg);

  DecoderNet straight = tiny_net(cfg.gamma);
  TrainState s1;
  train(straight, data, layouts, cfg, s1);

  auto dir = temp_dir("resume");
  DecoderNet first = tiny_net(cfg.gamma);
  TrainState s2;
  train(first, data, layouts, cfg, s2, [](const DecoderNet&, const TrainState& s) { return s.epoch < 2; });
  ASSERT_EQ(s2.epoch, 2u);
  save_training(dir / "ckpt.bin", first, s2);

  TrainState s3;
  DecoderNet resumed = load_training(dir / "ckpt.bin", s3);
  EXPECT_EQ(s3.epoch, 2u);
  train(resumed, data, layouts, cfg, s3);
  EXPECT_EQ(flat_params(resumed), flat_params(straight));
  EXPECT_EQ(s3.loss, s1.loss);
  EXPECT_EQ(s3.physics_loss, s1.physics_loss);
}

TEST(Train, DivergenceGuardNamesEpochAndSample) {
  SnapshotSet data = tiny_data();
  TrainConfig cfg = tiny_config();
  cfg.divergence_limit = 1e-12;
  DecoderNet net = tiny_net(cfg.gamma);
  TrainState st;
  try {
    train(net, data, make_train_layouts(data, cfg), cfg, st);
    FAIL() << "expected divergence";
  } catch (const DivergenceError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("epoch 0"), std::string::npos) << msg;
    EXPECT_NE(msg.find("sample"), std::string::npos) << msg;
  }
}

TEST(Train, RejectsMismatchedNetwork) {
  SnapshotSet data = tiny_data();
  TrainConfig cfg = tiny_config();
  DecoderNet net = tiny_net(cfg.gamma + 1);
  TrainState st;
  EXPECT_THROW(train(net, data, make_train_layouts(data, cfg), cfg, st), ConfigError);
}

TEST(Train, PhysicsNeedsThreeStates) {
  SnapshotSet data = tiny_data();
  TrainConfig cfg = tiny_config();
  cfg.gamma = 2;
  cfg.zeta0 = 0.1;
  DecoderNet net = tiny_net(2);
  TrainState st;
  EXPECT_THROW(train(net, data, make_train_layouts(data, cfg), cfg, st), ConfigError);
}

TEST(Train, ContinuousDecoderTrainsAndEvaluatesOffGrid) {
  SnapshotSet data = tiny_data();
  TrainConfig cfg = tiny_config();
  cfg.sensors = 4;
  cfg.labels = 5;
  cfg.zeta0 = 1e-3;
  cfg.collocation = 6;
  cfg.epochs = 2;
  DecoderNet net = tiny_net(cfg.gamma, 0, DecoderMode::Continuous);
  TrainState st;
  const auto layouts = make_train_layouts(data, cfg);
  train(net, data, layouts, cfg, st);
  for (double l : st.loss) EXPECT_TRUE(std::isfinite(l));
  EXPECT_GT(st.physics_loss.front(), 0.0);

  Tensor coords = grid_coords(data.grid);
  Tensor fine(Shape{32, 1});
  for (std::size_t i = 0; i < 32; ++i) fine[i] = -1.0 + 2.0 * static_cast<double>(i) / 32.0;
  SensorBlock b{time_window(measure(data.z, layouts.sensors), 0, 3), layouts.sensors.window(0, 3)};
  InnerConfig ic;
  Tensor d = predict(net, b, ic, &coords, &fine);
  EXPECT_EQ(d.shape(), (Shape{3, 1, 32}));
  EXPECT_TRUE(d.all_finite());
  // Even grid points of the fine grid coincide with the training grid.
  Tensor coarse = predict(net, b, ic, &coords);
  for (std::size_t r = 0; r < 16; ++r) EXPECT_NEAR(d[32 + 2 * r], coarse[16 + r], 1e-12);
}

TEST(Chunks, TrainingUsesFirstN) {
  SnapshotSet data = tiny_data();
  TrainConfig cfg = tiny_config();
  EXPECT_EQ(train_chunk_indices(data, cfg), (std::vector<std::size_t>{0, 1, 2, 3}));
  cfg.samples = 6;  // only 5 chunks of 3 states with stride 2 in 12 steps
  EXPECT_THROW(train_chunk_indices(data, cfg), ConfigError);
}

TEST(Chunks, TestChunksEvenlySpaced) {
  SnapshotSet data = tiny_data(50);
  TestConfig tc;
  tc.samples = 12;
  auto ks = test_chunk_indices(data, tc, 5, 2);  // 23 chunks
  ASSERT_EQ(ks.size(), 12u);
  EXPECT_EQ(ks.front(), 0u);
  EXPECT_EQ(ks.back(), 22u);
  EXPECT_TRUE(std::is_sorted(ks.begin(), ks.end()));
  tc.samples = 24;
  EXPECT_THROW(test_chunk_indices(data, tc, 5, 2), ConfigError);
}

TEST(Baseline, MeanOverTrainingWindows) {
  SnapshotSet data = tiny_data();
  Tensor b = baseline_field(data, {0, 2}, 3, 2);  // steps 0..2 and 4..6
  for (std::size_t r = 0; r < 16; ++r) {
    double s = 0.0;
    for (std::size_t l : {0u, 1u, 2u, 4u, 5u, 6u}) s += data.z[l * 16 + r];
    EXPECT_NEAR(b[r], s / 6.0, 1e-15);
  }
}

TEST(TestLoop, RowsBaselineAndIsolation) {
  SnapshotSet data = tiny_data();
  DecoderNet net = tiny_net(3);
  auto dir = temp_dir("isolation");
  net.save(dir / "ckpt.bin");
  const std::string before = io::file_digest(dir / "ckpt.bin");
  DecoderNet loaded = DecoderNet::load(dir / "ckpt.bin");

  TestConfig tc;
  tc.eta_i = 0.5;
  tc.inner_steps = 5;
  tc.sensor_counts = {2, 6};
  tc.snr_db = {std::nullopt, 20.0};
  tc.samples = 3;
  Tensor base = baseline_field(data, {0, 1}, 3, 2);
  ErrorReport rep = test(loaded, data, tc, 2, base);
  EXPECT_EQ(rep.rows.size(), 2u * 2u * 3u);
  for (const auto& r : rep.rows) {
    EXPECT_GE(r.eps, 0.0);
    const std::size_t l = r.k * 2 + 2;
    EXPECT_DOUBLE_EQ(r.baseline, relative_error({base.raw(), 16}, {data.z.raw() + l * 16, 16}));
  }
  EXPECT_EQ(io::file_digest(dir / "ckpt.bin"), before);
  EXPECT_EQ(flat_params(loaded), flat_params(net));

  ErrorReport again = test(loaded, data, tc, 2, base);
  ASSERT_EQ(again.rows.size(), rep.rows.size());
  for (std::size_t i = 0; i < rep.rows.size(); ++i) EXPECT_EQ(again.rows[i].eps, rep.rows[i].eps);
}

TEST(TestLoop, RejectsBadConfigAndMismatch) {
  SnapshotSet data = tiny_data();
  DecoderNet net = tiny_net(3);
  Tensor base = baseline_field(data, {0}, 3, 2);
  TestConfig tc;
  tc.sensor_counts = {};
  EXPECT_THROW(test(net, data, tc, 2, base), ConfigError);
  tc.sensor_counts = {0};
  EXPECT_THROW(test(net, data, tc, 2, base), ConfigError);
  tc.sensor_counts = {4};
  tc.snr_db = {};
  EXPECT_THROW(test(net, data, tc, 2, base), ConfigError);
  tc.snr_db = {std::nullopt};
  tc.samples = 2;
  tc.gamma_star = 3;
  EXPECT_THROW(test(net, data, tc, 2, base), ConfigError);

  SnapshotSet other = tiny_data();
  other.system = System::Burgers2d;
  other.grid = {4, 4, 0.25, 0.25, 0.0, 0.0, true};
  other.z = Tensor(Shape{12, 2, 16}, 1.0);
  tc.gamma_star = 2;
  EXPECT_THROW(test(net, other, tc, 2, Tensor(Shape{2, 16}, 1.0)), ConfigError);
}

TEST(Report, RowsSummaryAndRoundTrip) {
  ErrorReport rep;
  const double eps[] = {0.1, 0.35, 0.2, 0.05, 0.3, 0.125};
  std::size_t i = 0;
  for (std::size_t k : {0u, 4u, 9u}) {
    for (std::size_t m : {0u, 1u}) {
      rep.rows.push_back({k, m, 16, std::nullopt, eps[i] / 3.0, 0.5 + static_cast<double>(i)});
      ++i;
    }
  }
  rep.rows.push_back({2, 0, 4, 10.0, std::numeric_limits<double>::quiet_NaN(), 0.7});

  auto dir = temp_dir("report");
  write_report(rep, dir / "r.csv", dir / "r.json");
  const std::string csv = io::read_text(dir / "r.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3 * 2 + 1 + 1);

  ErrorReport back = read_report_csv(dir / "r.csv");
  ASSERT_EQ(back.rows.size(), rep.rows.size());
  std::vector<double> a, b;
  for (std::size_t r = 0; r + 1 < rep.rows.size(); ++r) {
    a.push_back(rep.rows[r].eps);
    b.push_back(back.rows[r].eps);
    EXPECT_EQ(back.rows[r].baseline, rep.rows[r].baseline);
  }
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  EXPECT_EQ(a, b);
  EXPECT_TRUE(std::isnan(back.rows.back().eps));
  EXPECT_EQ(back.rows.back().snr_db, std::optional<double>(10.0));

  auto summary = nlohmann::json::parse(io::read_text(dir / "r.json"));
  for (const auto& cell : summary.at("cells")) {
    if (cell.at("p") != 16) continue;
    const std::size_t m = cell.at("m");
    double sum = 0.0;
    for (std::size_t r = 0; r < 6; ++r) {
      if (rep.rows[r].m == m) sum += rep.rows[r].eps;
    }
    EXPECT_NEAR(cell.at("eps").at("mean").get<double>(), sum / 3.0, 1e-15);
  }
  EXPECT_EQ(rep.failures(), 1u);
  EXPECT_EQ(summary.at("cells").size(), 3u);
  // One table row per cell plus a header.
  const std::string table = format_summary(summary);
  EXPECT_EQ(std::count(table.begin(), table.end(), '\n'), 4);
}

TEST(Report, QuartilesOfKnownSample) {
  ErrorReport rep;
  for (double e : {4.0, 1.0, 3.0, 2.0, 5.0}) rep.rows.push_back({0, 0, 4, std::nullopt, e, 0.0});
  auto s = rep.summary().at("cells").at(0).at("eps");
  EXPECT_EQ(s.at("median").get<double>(), 3.0);
  EXPECT_EQ(s.at("q1").get<double>(), 2.0);
  EXPECT_EQ(s.at("q3").get<double>(), 4.0);
  EXPECT_EQ(s.at("mean").get<double>(), 3.0);
}

TEST(Report, EmptyReportRejected) {
  auto dir = temp_dir("empty");
  EXPECT_THROW(write_report(ErrorReport{}, dir / "r.csv", dir / "r.json"), ConfigError);
}

TEST(Report, UnwritablePathRejected) {
  ErrorReport rep;
  rep.rows.push_back({0, 0, 4, std::nullopt, 0.1, 0.2});
  EXPECT_THROW(write_report(rep, "/nonexistent_dir/x/r.csv", "/nonexistent_dir/x/r.json"), IoError);
}
