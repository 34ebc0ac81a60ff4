#include <benchmark/benchmark.h>

#include <vector>

#include "sewa/averagers.hpp"
#include "sewa/experiment.hpp"
#include "sewa/mask_learning.hpp"
#include "sewa/rng.hpp"

using namespace sewa;

namespace {

MlpSpec spirals_model() {
  MlpSpec spec;
  spec.layer_sizes = {2, 16, 16, 2};
  spec.activation = Activation::relu;
  spec.loss = LossKind::cross_entropy_softmax;
  return spec;
}

Dataset spirals(std::size_t n) {
  SpiralsParams p;
  p.n = n;
  p.seed = 1;
  return make_spirals(p);
}

TrajectoryWindow noisy_window(const MlpSpec& spec, std::size_t k) {
  const WeightVector center = mlp_init(spec, 3);
  rng::Stream st(4);
  TrajectoryWindow window(k);
  for (std::size_t i = 0; i < k; ++i) {
    WeightVector w = center;
    for (std::size_t j = 0; j < w.dim(); ++j) w[j] += 0.1 * st.normal();
    window.push({(i + 1) * 10, std::move(w), 0.0});
  }
  return window;
}

void BM_LossAndGrad(benchmark::State& state) {
  const auto spec = spirals_model();
  const auto data = spirals(static_cast<std::size_t>(state.range(0)));
  const auto w = mlp_init(spec, 1);
  for (auto _ : state) benchmark::DoNotOptimize(loss_and_grad(w, spec, data));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_LossAndGrad)->Arg(16)->Arg(256)->Arg(1024);

void BM_SgdTrain(benchmark::State& state) {
  const auto spec = spirals_model();
  const auto data = spirals(800);
  SgdConfig cfg;
  cfg.steps = static_cast<std::size_t>(state.range(0));
  cfg.batch_size = 16;
  cfg.capture_every = 10;
  cfg.schedule = ConstantRate{0.6};
  for (auto _ : state) benchmark::DoNotOptimize(sgd_train(spec, data, cfg));
}
BENCHMARK(BM_SgdTrain)->Arg(1000)->Unit(benchmark::kMillisecond);

void BM_UniformAverage(benchmark::State& state) {
  const auto spec = spirals_model();
  const auto window = noisy_window(spec, static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(uniform_average(window));
}
BENCHMARK(BM_UniformAverage)->Arg(10)->Arg(100);

void BM_ObjectiveGrad(benchmark::State& state) {
  const auto spec = spirals_model();
  const auto data = spirals(200);
  const auto window = noisy_window(spec, 100);
  const std::vector<double> s(100, 0.05);
  const MaskProblem problem{window, spec, data};
  const auto samples = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(objective_grad(problem, s, 0.5, samples, 7));
}
BENCHMARK(BM_ObjectiveGrad)->Arg(1)->Arg(8)->Unit(benchmark::kMillisecond);

void BM_ExactExpectedLoss(benchmark::State& state) {
  const auto spec = spirals_model();
  const auto data = spirals(64);
  const auto k = static_cast<std::size_t>(state.range(0));
  const auto window = noisy_window(spec, k);
  const std::vector<double> s(k, 0.4);
  const MaskProblem problem{window, spec, data};
  for (auto _ : state) benchmark::DoNotOptimize(exact_expected_loss(problem, s));
}
BENCHMARK(BM_ExactExpectedLoss)->Arg(6)->Arg(10)->Unit(benchmark::kMillisecond);

void BM_ProjectFeasible(benchmark::State& state) {
  rng::Stream st(9);
  std::vector<double> raw(static_cast<std::size_t>(state.range(0)));
  for (auto& v : raw) v = st.uniform(-0.5, 1.5);
  for (auto _ : state) benchmark::DoNotOptimize(project_feasible(raw, 5));
}
BENCHMARK(BM_ProjectFeasible)->Arg(100)->Arg(1000);

void BM_NonconvexBound(benchmark::State& state) {
  BoundInputs b;
  b.k = 50;
  b.T = 100000;
  b.s = 0.3;
  for (auto _ : state) benchmark::DoNotOptimize(nonconvex_bound(b));
}
BENCHMARK(BM_NonconvexBound);

}  // namespace

BENCHMARK_MAIN();
