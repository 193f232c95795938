#include <benchmark/benchmark.h>

#include <Eigen/Dense>

#include "evolyap/lyapunov.hpp"

using namespace evolyap;

static void BM_TailEnergyValue(benchmark::State& state) {
  const int dim = static_cast<int>(state.range(0));
  Eigen::MatrixXd A = -Eigen::MatrixXd::Identity(dim, dim);
  auto W = std::make_shared<EvolutionFamily>(TimeVaryingOperator::constant(A), Stepper::Exact,
                                             1e-2);
  const auto V = build_V(W, 1.0, 1.0, 8.0, 1e-2);
  Eigen::VectorXd x = Eigen::VectorXd::Ones(dim);
  for (auto _ : state) {
    benchmark::DoNotOptimize(V(0.0, x));
  }
}
BENCHMARK(BM_TailEnergyValue)->Arg(2)->Arg(16)->Arg(64);

static void BM_LieDerivative(benchmark::State& state) {
  auto W = std::make_shared<EvolutionFamily>(TimeVaryingOperator::scalar_constant(-1.0),
                                             Stepper::Exact, 1e-3);
  const auto V = build_V(W, 1.0, 1.0, 8.0, 1e-3);
  const auto psi = NonlinearTerm::zero(1);
  const auto u = InputSignal::zero();
  LieOptions opt;
  opt.h = 1e-4;
  const Eigen::VectorXd x = Eigen::VectorXd::Ones(1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(lie_derivative(V, W->generator(), psi, 0.5, x, u, opt));
  }
}
BENCHMARK(BM_LieDerivative);

static void BM_OperatorCertificate(benchmark::State& state) {
  Eigen::MatrixXd A(2, 2);
  A << -1.0, 0.5, -0.5, -2.0;
  auto op = TimeVaryingOperator::constant(A);
  EvolutionFamily W(op, Stepper::Exact, 1e-2);
  std::vector<double> grid{0.0, 1.0};
  for (auto _ : state) {
    benchmark::DoNotOptimize(build_P(op, W, grid, {1.5, 0.8}, 8.0, 1e-2));
  }
}
BENCHMARK(BM_OperatorCertificate);
