#include "urkf/bench.hpp"
#include "urkf/filters.hpp"
#include "urkf/least_favorable.hpp"
#include "urkf/numerics.hpp"
#include "urkf/stability.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace urkf;

namespace {

LinearGaussianModel model38() {
  LinearGaussianModel m;
  m.A = Matrix(2, 2);
  m.A << 0.1, 1.0, 0.0, 0.6;
  m.C = Matrix(1, 2);
  m.C << 1.0, -1.0;
  m.Q = Matrix(2, 2);
  m.Q << 0.9050, 0.8150, 0.8150, 0.7450;
  m.R = Matrix::Identity(1, 1);
  return m;
}

LinearGaussianModel model47() {
  LinearGaussianModel m = model38();
  m.A(1, 1) = 0.95;
  m.Q << 0.9050, 0.8575, 0.8575, 1.7225;
  return m;
}

Matrix random_spd(Eigen::Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Matrix g(n, n);
  for (Eigen::Index i = 0; i < g.size(); ++i) g(i) = normal(rng);
  return g * g.transpose() / static_cast<double>(n) + 0.1 * Matrix::Identity(n, n);
}

}  // namespace

static void BM_SolveBudget(benchmark::State& state) {
  const Matrix p = random_spd(state.range(0), 1);
  for (auto _ : state) benchmark::DoNotOptimize(solve_budget(p, 0.05).theta);
}
BENCHMARK(BM_SolveBudget)->Arg(2)->Arg(5)->Arg(10)->Arg(20);

static void BM_CovarianceStep(benchmark::State& state) {
  const auto m = model38();
  const FilterKind kinds[] = {FilterKind::kKf, FilterKind::kUrkf, FilterKind::kPrkf, FilterKind::kUrsf,
                              FilterKind::kPrsf};
  FilterConfig cfg;
  cfg.kind = kinds[state.range(0)];
  if (cfg.kind == FilterKind::kUrkf || cfg.kind == FilterKind::kPrkf) cfg.tolerance = 0.02;
  if (cfg.kind == FilterKind::kUrsf || cfg.kind == FilterKind::kPrsf) cfg.theta = 0.05;
  const Matrix p = steady_state(m, FilterConfig::kf(), m.Q).step.prior_cov;
  for (auto _ : state) benchmark::DoNotOptimize(covariance_step(m, cfg, p).gain(0, 0));
  state.SetLabel(std::string(to_string(cfg.kind)));
}
BENCHMARK(BM_CovarianceStep)->DenseRange(0, 4);

static void BM_LeastFavorableSynthesis(benchmark::State& state) {
  const auto m = model38();
  const Matrix p0 = 0.01 * Matrix::Identity(2, 2);
  const auto horizon = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) {
    const ForwardPass fwd = forward_gains(m, FilterConfig::urkf(0.02), p0, horizon);
    const BackwardPass bwd = backward_pass(fwd, m);
    benchmark::DoNotOptimize(assemble_lf(fwd, bwd, m).a_bar.size());
  }
}
BENCHMARK(BM_LeastFavorableSynthesis)->Arg(100)->Arg(1000);

static void BM_ErrorCovRecursion(benchmark::State& state) {
  const auto m = model38();
  const Matrix p0 = 0.01 * Matrix::Identity(2, 2);
  const ForwardPass fwd = forward_gains(m, FilterConfig::urkf(0.02), p0, 300);
  const BackwardPass bwd = backward_pass(fwd, m);
  for (auto _ : state) benchmark::DoNotOptimize(error_cov_recursion(m, fwd, bwd, fwd.gains, p0).size());
}
BENCHMARK(BM_ErrorCovRecursion);

static void BM_Cmax(benchmark::State& state) {
  const auto m = model38();
  for (auto _ : state) benchmark::DoNotOptimize(c_max(m, 10, 20).c_max);
}
BENCHMARK(BM_Cmax)->Unit(benchmark::kMillisecond);

static void BM_ThetaMaxDefaultGrid(benchmark::State& state) {
  const auto m = model47();
  ThetaMaxSearch search;
  search.threads = 1;
  for (auto _ : state) benchmark::DoNotOptimize(theta_max(m, 10, search).update.theta_max);
}
BENCHMARK(BM_ThetaMaxDefaultGrid)->Unit(benchmark::kMillisecond)->Iterations(1);

static void BM_MonteCarlo(benchmark::State& state) {
  McConfig cfg;
  cfg.trials = static_cast<std::size_t>(state.range(0));
  cfg.horizon = 200;
  cfg.threads = 1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(run_monte_carlo(cfg, Scenario::of(ScenarioKind::kOutlier)).time_average[0]);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_MonteCarlo)->Arg(20)->Arg(200)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
