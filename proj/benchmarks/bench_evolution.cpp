#include <benchmark/benchmark.h>

#include <Eigen/Dense>

#include "evolyap/evolution.hpp"

using namespace evolyap;

namespace {

Eigen::MatrixXd rotation_decay(int dim) {
  Eigen::MatrixXd A = -0.5 * Eigen::MatrixXd::Identity(dim, dim);
  for (int i = 0; i + 1 < dim; i += 2) {
    A(i, i + 1) += 1.0;
    A(i + 1, i) -= 1.0;
  }
  return A;
}

}  // namespace

static void BM_PropagateRK4(benchmark::State& state) {
  const int dim = static_cast<int>(state.range(0));
  EvolutionFamily W(TimeVaryingOperator::constant(rotation_decay(dim)), Stepper::RK4, 1e-3);
  Eigen::VectorXd x = Eigen::VectorXd::Ones(dim);
  for (auto _ : state) {
    benchmark::DoNotOptimize(W.propagate(0.0, 1.0, x));
  }
}
BENCHMARK(BM_PropagateRK4)->Arg(2)->Arg(8)->Arg(32);

static void BM_PropagateExact(benchmark::State& state) {
  const int dim = static_cast<int>(state.range(0));
  EvolutionFamily W(TimeVaryingOperator::constant(rotation_decay(dim)), Stepper::Exact, 1e-3);
  Eigen::VectorXd x = Eigen::VectorXd::Ones(dim);
  for (auto _ : state) {
    benchmark::DoNotOptimize(W.propagate(0.0, 1.0, x));
  }
}
BENCHMARK(BM_PropagateExact)->Arg(2)->Arg(32)->Arg(128);

static void BM_OperatorNorm(benchmark::State& state) {
  const int dim = static_cast<int>(state.range(0));
  EvolutionFamily W(TimeVaryingOperator::constant(rotation_decay(dim)), Stepper::RK4, 1e-2);
  double t = 1.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(W.operator_norm(0.0, t));
    t += 1e-9;  // defeat the singular-value cache
  }
}
BENCHMARK(BM_OperatorNorm)->Arg(8)->Arg(32);

static void BM_ClassifyScalar(benchmark::State& state) {
  EvolutionFamily W(make_alternating_log_scalar(), Stepper::Exact, 1e-2);
  ClassifyOptions opt;
  for (double t0 = 0.0; t0 <= 9.5; t0 += 0.5) opt.t0_grid.push_back(t0);
  opt.horizon = 10.0;
  opt.T_step = 0.5;
  opt.fit_lower_envelope = false;
  for (auto _ : state) {
    benchmark::DoNotOptimize(W.classify(opt));
  }
}
BENCHMARK(BM_ClassifyScalar);

BENCHMARK_MAIN();
