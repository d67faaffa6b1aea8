#include <benchmark/benchmark.h>

#include <random>

#include "ensers/autodiff/gradient.hpp"
#include "ensers/datagen/solvers.hpp"
#include "ensers/harness.hpp"
#include "ensers/physics/loss.hpp"

using namespace ensers;

namespace {

Tensor random_tensor(const Shape& shape, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Tensor t(shape);
  for (double& v : t.values()) v = u(rng);
  return t;
}

// Burgers-sized discrete decoder: 8 -> 64 -> 64 -> 5 x 2 x 1024.
DecoderNet burgers_net() {
  DecoderLayout lay{DecoderMode::Discrete, 5, 2, 1024, 8, 0};
  return DecoderNet({{8, 64, 64, lay.output_width()}, Activation::Softplus, 0}, lay);
}

const SnapshotSet& burgers_data() {
  static const SnapshotSet data = [] {
    Grid g = burgers_grid(32);
    return solve_burgers(burgers_ic(g, 0), g, BurgersRun{}, 0);
  }();
  return data;
}

}  // namespace

static void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Tensor a = random_tensor({n, n}, 1), b = random_tensor({n, n}, 2);
  for (auto _ : state) benchmark::DoNotOptimize(ad::matmul(a, b));
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(2 * n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(64)->Arg(256);

static void BM_PeriodicStencil(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Tensor x = random_tensor({n, n}, 3);
  const auto st = StencilSet::make(0.1, 0.1);
  for (auto _ : state) benchmark::DoNotOptimize(stencil_lap(x, st, true));
}
BENCHMARK(BM_PeriodicStencil)->Arg(32)->Arg(128);

static void BM_DecodeDiscrete(benchmark::State& state) {
  const DecoderNet net = burgers_net();
  const Tensor xi = random_tensor({8}, 4);
  for (auto _ : state) {
    ad::Tape tape;
    BoundDecoder dec = net.bind(tape, false);
    benchmark::DoNotOptimize(dec.decode_discrete(tape.constant(xi)).value());
  }
}
BENCHMARK(BM_DecodeDiscrete);

static void BM_Infer(benchmark::State& state) {
  const SnapshotSet& data = burgers_data();
  const DecoderNet net = burgers_net();
  const IndexLayout lay = sample_layout(data.steps(), 2, 16, data.points(), 7);
  const Tensor meas = measure(data.z, lay);
  SensorBlock block{time_window(meas, 0, 5), lay.window(0, 5)};
  InnerConfig cfg;
  cfg.steps = static_cast<std::size_t>(state.range(0));
  cfg.step_size = 0.5;
  cfg.loss = InnerLoss::Huber;
  for (auto _ : state) benchmark::DoNotOptimize(predict(net, block, cfg));
}
BENCHMARK(BM_Infer)->Arg(10)->Arg(100)->Unit(benchmark::kMillisecond);

static void BM_TrainEpoch(benchmark::State& state) {
  const SnapshotSet& data = burgers_data();
  TrainConfig cfg;
  cfg.optimizer = Optimizer::Adam;
  cfg.eta_o = 1e-3;
  cfg.batch = 1;
  cfg.epochs = 1;
  cfg.samples = 2;
  cfg.labels = 205;
  cfg.eta_i0 = 1.0;
  cfg.zeta0 = state.range(0) ? 1e-3 : 0.0;
  const TrainLayouts layouts = make_train_layouts(data, cfg);
  for (auto _ : state) {
    DecoderNet net = burgers_net();
    TrainState st;
    train(net, data, layouts, cfg, st);
    benchmark::DoNotOptimize(st.loss.back());
  }
  state.SetLabel(state.range(0) ? "with physics" : "data only");
}
BENCHMARK(BM_TrainEpoch)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

static void BM_SolveBurgers(benchmark::State& state) {
  const Grid g = burgers_grid(32);
  const Tensor ic = burgers_ic(g, 0);
  for (auto _ : state) benchmark::DoNotOptimize(solve_burgers(ic, g, BurgersRun{}, 0).z);
}
BENCHMARK(BM_SolveBurgers)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
