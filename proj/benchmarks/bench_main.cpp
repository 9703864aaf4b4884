#include <benchmark/benchmark.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "hvfwi/helmholtz.hpp"
#include "hvfwi/hv_metric.hpp"

namespace {

hvfwi::GridSignal bump(int n, double center) {
  std::vector<double> v(n + 1);
  for (int i = 0; i <= n; ++i) {
    const double x = double(i) / n;
    v[i] = std::exp(-80.0 * (x - center) * (x - center));
  }
  return hvfwi::GridSignal(std::move(v));
}

void BM_HvDistance(benchmark::State& state) {
  const int n_x = static_cast<int>(state.range(0));
  const auto f0 = bump(n_x, 0.4);
  const auto f1 = bump(n_x, 0.6);
  hvfwi::HVParams params;
  params.kappa = 1.0;
  params.lambda = 1.0;
  params.epsilon = 1e-3;
  params.n_x = n_x;
  params.max_iters = 8;
  params.tol = 1e-14;  // run the full iteration budget
  for (auto _ : state) {
    auto res = hvfwi::hv_distance(f0, f1, params);
    benchmark::DoNotOptimize(res.distance);
  }
  state.SetComplexityN(n_x);
}
BENCHMARK(BM_HvDistance)->RangeMultiplier(2)->Range(64, 512)->Complexity();

void BM_HelmholtzFactor(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const auto model = hvfwi::VelocityModel2D::constant(n, n, 10.0, 1500.0);
  const double omega = 2.0 * std::numbers::pi * 5.0;
  for (auto _ : state) {
    hvfwi::HelmholtzSystem sys(model, omega, {});
    benchmark::DoNotOptimize(&sys);
  }
}
BENCHMARK(BM_HelmholtzFactor)->Arg(64)->Arg(128);

void BM_HelmholtzSolve(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const auto model = hvfwi::VelocityModel2D::constant(n, n, 1500.0 / 150.0 * 10.0, 1500.0);
  const double omega = 2.0 * std::numbers::pi * 5.0;
  hvfwi::HelmholtzSystem sys(model, omega, {});
  const std::array<double, 2> src{model.width() / 2, model.depth() / 2};
  for (auto _ : state) {
    auto u = sys.solve_point_source(src, {1.0, 0.0});
    benchmark::DoNotOptimize(u.u.data());
  }
}
BENCHMARK(BM_HelmholtzSolve)->Arg(64)->Arg(128);

}  // namespace

BENCHMARK_MAIN();
