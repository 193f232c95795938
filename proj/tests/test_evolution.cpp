#include "evolyap/evolution.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "doctest.h"

using namespace evolyap;

namespace {

// Independent closed-form integral of the alternating-log scalar coefficient,
// evaluated by stepping half-unit pieces explicitly.
double alternating_log_integral_oracle(double s, double t) {
  double acc = 0.0;
  double a = s;
  while (a < t - 1e-12) {
    const double k = std::floor(a + 1e-12);
    const bool decay = (a - k) < 0.5 - 1e-12;
    const double piece_end = decay ? k + 0.5 : k + 1.0;
    const double b = std::min(t, piece_end);
    const double val = decay ? -2.0 * std::log(2.0 * (k + 1.0) * (k + 1.0))
                             : 2.0 * std::log(k + 1.0);
    acc += val * (b - a);
    a = b;
  }
  return acc;
}

EvolutionFamily random_stable_family(std::mt19937_64& rng, int dim) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::MatrixXd S(dim, dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) S(i, j) = 0.5 * gauss(rng);
  Eigen::MatrixXd A = -Eigen::MatrixXd::Identity(dim, dim) + 0.5 * (S - S.transpose());
  return EvolutionFamily(TimeVaryingOperator::constant(A), Stepper::RK4, 1e-2);
}

}  // namespace

TEST_CASE("scalar constant decay propagates exactly") {
  EvolutionFamily W(TimeVaryingOperator::scalar_constant(-1.0), Stepper::Exact, 1e-2);
  const Eigen::VectorXd x = Eigen::VectorXd::Ones(1);
  CHECK(W.propagate(0.0, 1.0, x)(0) == doctest::Approx(std::exp(-1.0)).epsilon(1e-9));
}

TEST_CASE("the propagator at equal times is the identity") {
  EvolutionFamily W(make_alternating_log_scalar(), Stepper::Exact, 1e-2);
  Eigen::VectorXd x = Eigen::VectorXd::Constant(1, 3.25);
  CHECK(W.propagate(2.5, 2.5, x)(0) == 3.25);
  CHECK(W.matrix(4.0, 4.0)(0, 0) == 1.0);
}

TEST_CASE("alternating-log scalar family matches its closed form") {
  EvolutionFamily W(make_alternating_log_scalar(), Stepper::Exact, 1e-2);

  // First unit interval contracts to exactly one half.
  const Eigen::VectorXd one = Eigen::VectorXd::Ones(1);
  CHECK(W.propagate(0.0, 1.0, one)(0) == doctest::Approx(0.5).epsilon(1e-14));

  // Unit-interval contraction and half-interval growth, k = 0..9.
  for (int k = 0; k <= 9; ++k) {
    const double contraction = 1.0 / (2.0 * (k + 1.0));
    CHECK(W.matrix(k, k + 1.0)(0, 0) == doctest::Approx(contraction).epsilon(1e-13));
    CHECK(W.operator_norm(k + 0.5, k + 1.0) == doctest::Approx(k + 1.0).epsilon(1e-13));
  }

  // k = 4 growth piece from the half-integer: |W(5, 4.5)| = 5.
  CHECK(W.operator_norm(4.5, 5.0) == doctest::Approx(5.0).epsilon(1e-13));

  // Norm equals exp of the exact coefficient integral at random times.
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> unif(0.0, 12.0);
  for (int trial = 0; trial < 100; ++trial) {
    double s = unif(rng), t = unif(rng);
    if (s > t) std::swap(s, t);
    const double expected = std::exp(alternating_log_integral_oracle(s, t));
    CHECK(W.operator_norm(s, t) == doctest::Approx(expected).epsilon(1e-11));
  }
}

TEST_CASE("diagonal contraction norm") {
  EvolutionFamily W(TimeVaryingOperator::constant(-Eigen::MatrixXd::Identity(2, 2)),
                    Stepper::Exact, 1e-2);
  CHECK(W.operator_norm(0.0, std::log(2.0)) == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(W.operator_norm(1.0, 1.0) == doctest::Approx(1.0));
}

TEST_CASE("UBRS constant of a contraction is one") {
  EvolutionFamily W(TimeVaryingOperator::scalar_constant(-1.0), Stepper::Exact, 1e-2);
  std::vector<double> grid;
  for (double t0 = 0.0; t0 <= 9.0; t0 += 1.0) grid.push_back(t0);
  const auto res = W.check_ubrs(grid, 0.05, 1e6);
  CHECK(res.ubrs);
  CHECK(res.K == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(res.power_bound_ok);
}

TEST_CASE("UBRS fails for the alternating-log family on a growing grid") {
  EvolutionFamily W(make_alternating_log_scalar(), Stepper::Exact, 1e-2);
  std::vector<double> grid;
  for (double t0 = 0.0; t0 <= 9.5; t0 += 0.5) grid.push_back(t0);
  const auto res = W.check_ubrs(grid, 0.05, 1e6);
  CHECK_FALSE(res.ubrs);
  CHECK(res.K == doctest::Approx(10.0).epsilon(1e-12));  // sup over [9, 10] is 10
}

TEST_CASE("UBRS constant of a sinusoidally modulated contraction") {
  // A(t) = -1 + 0.5 sin t; the scalar exact integral bounds the window sup.
  auto A = TimeVaryingOperator::constant_plus_scalar(
      -Eigen::MatrixXd::Identity(1, 1), [](double t) { return 0.5 * std::sin(t); },
      [](double t) { return -0.5 * std::cos(t); }, 1.5);
  EvolutionFamily W(A, Stepper::Exact, 1e-2);
  std::vector<double> grid;
  for (double t0 = 0.0; t0 <= 9.0; t0 += 0.5) grid.push_back(t0);
  const auto res = W.check_ubrs(grid, 0.01, 1e6);

  // Oracle: K = max over the grid of exp(int (-1 + 0.5 sin)).
  double oracle = 0.0;
  for (double t0 : grid)
    for (double s = 0.0; s <= 1.0; s += 0.01) {
      const double integral = -s + 0.5 * (std::cos(t0) - std::cos(t0 + s));
      oracle = std::max(oracle, std::exp(integral));
    }
  CHECK(res.ubrs);
  CHECK(res.K == doctest::Approx(oracle).epsilon(1e-9));
  CHECK(res.K <= std::exp(0.5) + 1e-9);
}

TEST_CASE("classification of the scalar contraction") {
  EvolutionFamily W(TimeVaryingOperator::scalar_constant(-1.0), Stepper::Exact, 1e-2);
  ClassifyOptions opt;
  opt.T_step = 0.02;
  opt.horizon = 8.0;
  const auto rep = W.classify(opt);
  CHECK(rep.uniformly_stable);
  CHECK(rep.N == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(rep.uniformly_attractive);
  CHECK(rep.uniformly_exponentially_stable);
  CHECK(rep.k == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(rep.w == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(rep.ubrs);
  CHECK(rep.K == doctest::Approx(1.0).epsilon(1e-12));
  for (const auto& at : rep.attract_times) {
    if (at.eps == 0.1) CHECK(at.T == doctest::Approx(std::log(10.0)).epsilon(0.02));
  }
}

TEST_CASE("classification of the alternating-log family") {
  EvolutionFamily W(make_alternating_log_scalar(), Stepper::Exact, 1e-2);
  ClassifyOptions opt;
  for (double t0 = 0.0; t0 <= 9.5; t0 += 0.5) opt.t0_grid.push_back(t0);
  opt.horizon = 10.0;
  opt.T_step = 0.5;
  const auto rep = W.classify(opt);
  CHECK_FALSE(rep.uniformly_stable);
  CHECK(rep.uniformly_attractive);
  CHECK_FALSE(rep.ubrs);
  CHECK_FALSE(rep.uniformly_exponentially_stable);
  for (const auto& at : rep.attract_times) {
    CHECK(at.found);
    const int m = static_cast<int>(std::ceil(-std::log2(at.eps)));
    CHECK(at.T <= m + 1.0 + 1e-9);
  }
}

TEST_CASE("classification of a rotation with weak decay") {
  Eigen::MatrixXd A(2, 2);
  A << -0.1, 1.0, -1.0, -0.1;
  EvolutionFamily W(TimeVaryingOperator::constant(A), Stepper::Exact, 1e-2);
  ClassifyOptions opt;
  opt.horizon = 30.0;
  opt.T_step = 0.5;
  const auto rep = W.classify(opt);
  // Eigenvalues -0.1 +- i give the exact decay rate.
  CHECK(rep.uniformly_exponentially_stable);
  CHECK(rep.w == doctest::Approx(0.1).epsilon(0.10));
}

TEST_CASE("cocycle residual on grid-aligned triples") {
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<int> pick(0, 19);
  for (int trial = 0; trial < 100; ++trial) {
    auto W = random_stable_family(rng, 3);
    // Times on the dt lattice.
    double s = 0.01 * pick(rng), r = s + 0.01 * (1 + pick(rng)), t = r + 0.01 * (1 + pick(rng));
    const Eigen::MatrixXd direct = W.matrix(s, t);
    const Eigen::MatrixXd split = W.matrix(r, t) * W.matrix(s, r);
    CHECK((direct - split).norm() <= 1e-8);
  }
}

TEST_CASE("propagation is linear") {
  std::mt19937_64 rng(19);
  std::normal_distribution<double> gauss(0.0, 1.0);
  auto W = random_stable_family(rng, 3);
  for (int trial = 0; trial < 100; ++trial) {
    Eigen::VectorXd x(3), y(3);
    for (int i = 0; i < 3; ++i) {
      x(i) = gauss(rng);
      y(i) = gauss(rng);
    }
    const double a = gauss(rng), b = gauss(rng);
    const Eigen::VectorXd lhs = W.propagate(0.0, 1.5, a * x + b * y);
    const Eigen::VectorXd rhs = a * W.propagate(0.0, 1.5, x) + b * W.propagate(0.0, 1.5, y);
    CHECK((lhs - rhs).norm() <= 1e-10 * ((a * x).norm() + (b * y).norm() + 1.0));
  }
}

TEST_CASE("the UES majorant dominates the sampled norm table") {
  Eigen::MatrixXd A(2, 2);
  A << -0.5, 1.0, -1.0, -0.5;
  EvolutionFamily W(TimeVaryingOperator::constant(A), Stepper::Exact, 1e-2);
  const auto rep = W.classify();
  REQUIRE(rep.uniformly_exponentially_stable);
  for (std::size_t j = 0; j < rep.T_grid.size(); ++j) {
    CHECK(rep.sup_norm_table[j] <= rep.k * std::exp(-rep.w * rep.T_grid[j]) * (1.0 + 1e-6));
  }
}

TEST_CASE("strong continuity in the terminal time") {
  EvolutionFamily W(make_alternating_log_scalar(), Stepper::Exact, 1e-3);
  const Eigen::VectorXd x = Eigen::VectorXd::Ones(1);
  const double base = W.propagate(0.0, 2.25, x)(0);
  double prev_err = std::numeric_limits<double>::infinity();
  for (double delta : {1e-2, 1e-4, 1e-6}) {
    const double err = std::abs(W.propagate(0.0, 2.25 + delta, x)(0) - base);
    CHECK(err < prev_err);
    prev_err = err;
  }
}

TEST_CASE("lower envelope fit of the scalar contraction") {
  EvolutionFamily W(TimeVaryingOperator::scalar_constant(-1.0), Stepper::Exact, 1e-2);
  ClassifyOptions opt;
  opt.fit_lower_envelope = true;
  opt.horizon = 8.0;
  const auto rep = W.classify(opt);
  REQUIRE(rep.lower_envelope.has_value());
  const auto [M, lambda] = *rep.lower_envelope;
  CHECK(M == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(lambda == doctest::Approx(1.0).epsilon(1e-3));
  // Minorant validated on the sampled table.
  for (std::size_t j = 0; j < rep.T_grid.size(); ++j) {
    CHECK(M * std::exp(-lambda * rep.T_grid[j]) <= rep.min_sv_table[j] * (1.0 + 1e-6));
  }
}
