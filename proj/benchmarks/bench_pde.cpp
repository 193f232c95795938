#include <benchmark/benchmark.h>

#include <Eigen/Dense>

#include "evolyap/pde.hpp"
#include "evolyap/semilinear.hpp"

using namespace evolyap;

static void BM_FourthOrderSigma(benchmark::State& state) {
  KSConfig cfg;
  cfg.rho = 30.0;
  cfg.grid.n = static_cast<int>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(ks_sigma(cfg));
  }
}
BENCHMARK(BM_FourthOrderSigma)->Arg(64)->Arg(128)->Arg(256);

static void BM_ImplicitStep(benchmark::State& state) {
  KSConfig cfg;
  cfg.rho = 30.0;
  cfg.grid.n = static_cast<int>(state.range(0));
  auto [A, psi] = ks_operator(cfg);
  Eigen::VectorXd x0 = Eigen::VectorXd::Ones(cfg.grid.n);
  x0 /= cfg.grid.l2_norm(x0);
  SolveOptions opt;
  opt.stepper = Stepper::ImplicitEuler;
  opt.dt = 1e-4;
  const auto u = InputSignal::sine(0.5, 3.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(solve_mild(A, psi, 0.0, x0, u, 0.01, opt));
  }
  state.SetItemsProcessed(state.iterations() * 100);  // steps per solve
}
BENCHMARK(BM_ImplicitStep)->Arg(64)->Arg(128);

static void BM_HeatExponentialStep(benchmark::State& state) {
  HeatConfig cfg;
  cfg.omega = 2.5;
  cfg.r = 2.5;
  cfg.grid.n = static_cast<int>(state.range(0));
  auto [A, psi] = heat_operator(cfg);
  Eigen::VectorXd x0 = Eigen::VectorXd::Ones(cfg.grid.n);
  x0 /= cfg.grid.l2_norm(x0);
  SolveOptions opt;
  opt.stepper = Stepper::Exact;
  opt.dt = 1e-3;
  const auto u = InputSignal::sine(0.5, 2.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(solve_mild(A, psi, 0.0, x0, u, 0.1, opt));
  }
}
BENCHMARK(BM_HeatExponentialStep)->Arg(64)->Arg(128);
