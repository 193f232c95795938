#include "evolyap/lyapunov.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "doctest.h"
#include "evolyap/pde.hpp"

using namespace evolyap;

namespace {

Eigen::VectorXd vec1(double v) { return Eigen::VectorXd::Constant(1, v); }

std::shared_ptr<EvolutionFamily> scalar_decay_family() {
  return std::make_shared<EvolutionFamily>(TimeVaryingOperator::scalar_constant(-1.0),
                                           Stepper::Exact, 1e-3);
}

// Rotation with decay plus a sinusoidal off-diagonal modulation; uniformly
// exponentially stable and genuinely time-varying.
TimeVaryingOperator rotating_modulated_operator() {
  return TimeVaryingOperator::general(
      2,
      [](double t) {
        Eigen::MatrixXd A(2, 2);
        const double m = 0.2 * std::sin(t);
        A << -0.5, 1.0 + m, -1.0 + m, -0.5;
        return A;
      },
      2.8);
}

// Test-side adaptive Simpson, independent of the library quadrature.
double adaptive_quad(const std::function<double(double)>& f, double a, double b, double tol,
                     int depth = 40) {
  const double m = 0.5 * (a + b);
  const double fa = f(a), fm = f(m), fb = f(b);
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  std::function<double(double, double, double, double, double, double, int)> rec =
      [&](double lo, double hi, double flo, double fmid, double fhi, double acc,
          int d) -> double {
    const double mid = 0.5 * (lo + hi);
    const double lm = 0.5 * (lo + mid), rm = 0.5 * (mid + hi);
    const double flm = f(lm), frm = f(rm);
    const double left = (mid - lo) / 6.0 * (flo + 4.0 * flm + fmid);
    const double right = (hi - mid) / 6.0 * (fmid + 4.0 * frm + fhi);
    if (d <= 0 || std::abs(left + right - acc) < 15.0 * tol)
      return left + right + (left + right - acc) / 15.0;
    return rec(lo, mid, flo, flm, fmid, left, d - 1) + rec(mid, hi, fmid, frm, fhi, right, d - 1);
  };
  return rec(a, b, fa, fm, fb, whole, depth);
}

}  // namespace

TEST_CASE("tail-energy certificate of the scalar contraction") {
  auto V = build_V(scalar_decay_family(), 1.0, 1.0, 8.0, 1e-3);
  // Closed form: int exp(-2 tau) = 1/2.
  CHECK(V(0.0, vec1(1.0)) == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(V(3.7, vec1(1.0)) == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(V(1.0, vec1(0.0)) == 0.0);
  const auto bracket = V.value_bracket(0.0, vec1(1.0));
  CHECK(bracket.lo <= 0.5);
  CHECK(bracket.hi >= 0.5);
}

TEST_CASE("tail-energy certificate of a diagonal system") {
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(2, 2);
  A(0, 0) = -1.0;
  A(1, 1) = -2.0;
  auto W = std::make_shared<EvolutionFamily>(TimeVaryingOperator::constant(A), Stepper::Exact,
                                             1e-3);
  auto V = build_V(W, 1.0, 1.0, 8.0, 1e-3);
  // Componentwise closed form: 1/2 + 1/4 = 0.75.
  Eigen::VectorXd x(2);
  x << 1.0, 1.0;
  CHECK(V(0.0, x) == doctest::Approx(0.75).epsilon(1e-6));
}

TEST_CASE("build_V refuses a missing majorant") {
  CHECK_THROWS_AS(build_V(scalar_decay_family(), 0.0, 0.0), NotExponentiallyStableError);
}

TEST_CASE("operator certificate of the scalar contraction") {
  auto A = TimeVaryingOperator::scalar_constant(-1.0);
  EvolutionFamily W(A, Stepper::Exact, 1e-3);
  std::vector<double> grid{0.0, 0.5, 1.0};
  const auto res = build_P(A, W, grid, {1.0, 1.0}, 8.0, 1e-3);
  CHECK(res.certificate.P_at(0.25)(0, 0) == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(res.max_residual <= 1e-6);
}

TEST_CASE("operator certificate of a diagonal system") {
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(2, 2);
  A(0, 0) = -1.0;
  A(1, 1) = -2.0;
  auto op = TimeVaryingOperator::constant(A);
  EvolutionFamily W(op, Stepper::Exact, 1e-3);
  std::vector<double> grid{0.0, 1.0};
  const auto res = build_P(op, W, grid, {1.0, 1.0}, 8.0, 1e-3);
  const Eigen::MatrixXd P = res.certificate.P_at(0.0);
  CHECK(P(0, 0) == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(P(1, 1) == doctest::Approx(0.25).epsilon(1e-6));
  CHECK(std::abs(P(0, 1)) <= 1e-9);
}

TEST_CASE("operator certificate of a modulated scalar generator") {
  // A(t) = -(2 + sin t): P(t) = int_t^inf exp(-4(tau-t) + 2 cos tau - 2 cos t).
  auto A = TimeVaryingOperator::constant_plus_scalar(
      Eigen::MatrixXd::Constant(1, 1, -2.0), [](double t) { return -std::sin(t); },
      [](double t) { return std::cos(t); }, 3.0);
  EvolutionFamily W(A, Stepper::Exact, 1e-3);
  std::vector<double> grid{0.2, 1.0, 2.5};
  const auto res = build_P(A, W, grid, {std::exp(2.0), 1.0}, 9.0, 5e-4);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double t = grid[i];
    const double oracle = adaptive_quad(
        [t](double tau) { return std::exp(-4.0 * (tau - t) + 2.0 * std::cos(tau) - 2.0 * std::cos(t)); },
        t, t + 12.0, 1e-12);
    CHECK(res.certificate.P_at(t)(0, 0) == doctest::Approx(oracle).epsilon(1e-5));
  }
  CHECK(res.max_residual <= 1e-3);
}

TEST_CASE("build_P requires a bounded generator") {
  auto unbounded = TimeVaryingOperator::general(
      1, [](double) { return Eigen::MatrixXd::Constant(1, 1, -1.0); }, std::nullopt);
  EvolutionFamily W(unbounded, Stepper::RK4, 1e-3);
  std::vector<double> grid{0.0};
  CHECK_THROWS_AS(build_P(unbounded, W, grid, {1.0, 1.0}), UnboundedGeneratorError);
}

TEST_CASE("Lie derivative of a quadratic certificate along scalar decay") {
  auto V = LyapunovCertificate::quadratic({0.0}, {Eigen::MatrixXd::Identity(1, 1)});
  auto A = TimeVaryingOperator::scalar_constant(-1.0);
  auto psi = NonlinearTerm::zero(1);
  LieOptions opt;
  opt.h = 1e-4;
  // d/dt x^2 = -2 x^2 at x = 1.
  const auto est = lie_derivative(V, A, psi, 0.0, vec1(1.0), InputSignal::zero(), opt);
  CHECK(est.value == doctest::Approx(-2.0).epsilon(1e-3));
  CHECK(est.richardson_ok);
  // Equilibrium.
  const auto zero = lie_derivative(V, A, psi, 0.0, vec1(0.0), InputSignal::zero(), opt);
  CHECK(std::abs(zero.value) <= 1e-6);
}

TEST_CASE("Lie derivative of the tail-energy certificate is the negative squared norm") {
  auto V = build_V(scalar_decay_family(), 1.0, 1.0, 8.0, 1e-4);
  auto A = TimeVaryingOperator::scalar_constant(-1.0);
  auto psi = NonlinearTerm::zero(1);
  LieOptions opt;
  opt.h = 1e-4;
  const auto est = lie_derivative(V, A, psi, 0.5, vec1(1.0), InputSignal::zero(), opt);
  // Along solutions, d/dt V = d/dt x(t)^2/2 = -x^2; here |x| = 1.
  CHECK(est.value == doctest::Approx(-1.0).epsilon(1e-3));
}

TEST_CASE("Lie derivative reports escape") {
  auto V = LyapunovCertificate::quadratic({0.0}, {Eigen::MatrixXd::Identity(1, 1)});
  auto A = TimeVaryingOperator::scalar_constant(0.0);
  NonlinearTerm psi(1, 1, [](double, const Eigen::VectorXd& x, const Eigen::VectorXd&) {
    return Eigen::VectorXd::Constant(1, x(0) * x(0));
  });
  LieOptions opt;
  opt.h = 0.5;
  opt.solve.blowup_cap = 10.0;
  CHECK_THROWS_AS(lie_derivative(V, A, psi, 0.0, vec1(8.0), InputSignal::zero(), opt),
                  EscapedError);
}

TEST_CASE("dissipation check on the scalar contraction with zero input") {
  auto V = build_V(scalar_decay_family(), 1.0, 1.0, 8.0, 1e-3);
  auto A = TimeVaryingOperator::scalar_constant(-1.0);
  auto B = std::make_shared<const TimeVaryingOperator>(TimeVaryingOperator::scalar_constant(1.0));
  auto u = std::make_shared<const InputSignal>(InputSignal::zero());

  std::vector<EnsemblePoint> pts;
  for (double x : {0.25, 0.5, 1.0, 2.0, 4.0}) pts.push_back({0.5, vec1(x), u});
  pts.push_back({1.0, vec1(0.0), u});

  LieOptions opt;
  opt.h = 1e-4;
  const auto rep = check_dissipation_iss(V, A, B, pts, 0.5, opt);
  // Closed form: Vdot = -x^2, rhs = (-1 + eta/2) x^2, margin -eta/2 x^2 <= 0.
  CHECK(rep.max_violation <= 1e-6 * std::max(rep.scale, 1.0));
  CHECK(rep.rows.back().violation == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(rep.all_richardson_ok);
  CHECK_THROWS_AS(check_dissipation_iss(V, A, B, pts, 2.5, opt), BadEtaError);
  CHECK_THROWS_AS(check_dissipation_iss(V, A, B, pts, 0.0, opt), BadEtaError);
}

TEST_CASE("dissipation bound on a modulated rotation with sinusoidal input") {
  auto op = rotating_modulated_operator();
  auto W = std::make_shared<EvolutionFamily>(op, Stepper::RK4, 2.5e-3);
  ClassifyOptions copt;
  copt.horizon = 16.0;
  const auto rep = W->classify(copt);
  REQUIRE(rep.uniformly_exponentially_stable);

  auto V = build_V(W, rep.k, rep.w, 8.0, 5e-3);
  auto B = std::make_shared<const TimeVaryingOperator>(
      TimeVaryingOperator::constant(Eigen::MatrixXd::Identity(2, 2)));
  auto u = std::make_shared<const InputSignal>(InputSignal::custom(2, [](double t) {
    Eigen::VectorXd v(2);
    v << 0.5 * std::sin(3.0 * t), 0.25 * std::cos(2.0 * t);
    return v;
  }));

  std::mt19937_64 rng(41);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> tdist(0.0, 6.0);
  std::vector<EnsemblePoint> pts;
  for (int i = 0; i < 100; ++i) {
    Eigen::VectorXd x(2);
    x << gauss(rng), gauss(rng);
    pts.push_back({tdist(rng), x, u});
  }

  LieOptions opt;
  opt.h = 1e-3;
  opt.solve.dt = 1e-3;
  const double eta_max = 2.0 * rep.w / (rep.k * rep.k);
  for (double frac : {0.2, 0.5, 0.9}) {
    const auto diss = check_dissipation_iss(V, op, B, pts, frac * eta_max, opt);
    CHECK(diss.max_violation <= 1e-2 * diss.scale);
  }
}

TEST_CASE("implication-form check gates on the input norm") {
  auto W = scalar_decay_family();
  auto V = build_V(W, 1.0, 1.0, 8.0, 1e-3);
  auto A = TimeVaryingOperator::scalar_constant(-1.0);
  auto psi = NonlinearTerm::zero(1);
  auto kappa = ComparisonFunction::sqrt_gain();
  auto mu = ComparisonFunction::linear(0.1);

  auto u0 = std::make_shared<const InputSignal>(InputSignal::zero());
  std::vector<EnsemblePoint> pts;
  for (double x : {0.5, 1.0, 2.0}) pts.push_back({0.0, vec1(x), u0});

  LieOptions opt;
  opt.h = 1e-4;
  const auto rep = check_implication_liss(V, A, psi, kappa, mu, pts, 10.0, 10.0, 1e-4, opt);
  CHECK(rep.checked == 3);
  CHECK(rep.violations == 0);

  // Points below the gate are skipped.
  auto u_big = std::make_shared<const InputSignal>(InputSignal::constant(4.0));
  std::vector<EnsemblePoint> gated{{0.0, vec1(1.0), u_big}};  // kappa(4) = 2 > 1
  const auto rep2 = check_implication_liss(V, A, psi, kappa, mu, gated, 10.0, 10.0, 1e-4, opt);
  CHECK(rep2.checked == 0);
  CHECK(rep2.skipped == 1);
}

TEST_CASE("implication-form check on the heat example below the threshold") {
  // V = |x|^2 with the epsilon-split bound gives Vdot <= -7 V whenever
  // |x| >= sqrt(|u|_sup) and |x| <= 1 (gate kappa(r) = sqrt r).
  HeatConfig hc;
  hc.grid.n = 32;
  hc.r = 2.5;
  hc.omega = 2.5;
  auto [A, psi] = heat_operator(hc);
  auto V = LyapunovCertificate::quadratic(
      {0.0}, {Eigen::MatrixXd::Identity(hc.grid.n, hc.grid.n)}, hc.grid.norm_weight());

  auto u = std::make_shared<const InputSignal>(InputSignal::custom(
      hc.grid.n,
      [n = hc.grid.n](double t) {
        return Eigen::VectorXd::Constant(n, 0.08 * std::sin(2.0 * t));
      },
      hc.grid.norm_weight(), 0.08 * std::sqrt(hc.grid.norm_weight() * hc.grid.n)));

  std::mt19937_64 rng(71);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> scale(0.4, 1.0);
  std::uniform_real_distribution<double> tdist(0.0, 3.0);
  std::vector<EnsemblePoint> pts;
  for (int i = 0; i < 12; ++i) {
    Eigen::VectorXd x(hc.grid.n);
    for (int j = 0; j < hc.grid.n; ++j) x(j) = gauss(rng);
    x *= scale(rng) / hc.grid.l2_norm(x);
    pts.push_back({tdist(rng), x, u});
  }

  LieOptions opt;
  opt.h = 1e-4;
  opt.solve.stepper = Stepper::Exact;
  const auto rep = check_implication_liss(V, A, psi, ComparisonFunction::sqrt_gain(),
                                          ComparisonFunction::linear(7.0), pts, 1.0, 1.0,
                                          1e-3, opt);
  CHECK(rep.checked > 0);
  CHECK(rep.violations == 0);
}

TEST_CASE("operator certificates are coercive with a bounded quadratic form") {
  Eigen::MatrixXd A(2, 2);
  A << -1.0, 0.6, -0.6, -2.0;
  auto op = TimeVaryingOperator::constant(A);
  EvolutionFamily W(op, Stepper::Exact, 1e-3);
  std::vector<double> grid{0.0, 0.5, 1.0, 1.5};
  const auto res = build_P(op, W, grid, {1.2, 0.9}, 8.0, 1e-3);

  double mu1 = 1e300, p = 0.0;
  for (double t : grid) {
    const Eigen::MatrixXd P = res.certificate.P_at(t);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(P);
    mu1 = std::min(mu1, es.eigenvalues()(0));
    p = std::max(p, spectral_norm(P));
  }
  CHECK(mu1 > 0.0);

  std::mt19937_64 rng(73);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    Eigen::VectorXd x(2);
    x << gauss(rng), gauss(rng);
    const double v = res.certificate(0.5, x);
    CHECK(v >= mu1 * x.squaredNorm() * (1.0 - 1e-9));
    CHECK(v <= p * x.squaredNorm() * (1.0 + 1e-9));
  }
}

TEST_CASE("integral estimate reduces to the envelope for zero input") {
  auto A = TimeVaryingOperator::scalar_constant(-1.0);
  auto psi = NonlinearTerm::zero(1);
  auto u0 = std::make_shared<const InputSignal>(InputSignal::zero());

  std::vector<IissCase> cases;
  cases.push_back({0.0, vec1(1.0), u0});
  cases.push_back({0.0, vec1(2.0), u0});
  cases.push_back({0.0, vec1(0.0), u0});

  const auto beta = ComparisonFunction::exponential_kl(1.001, 1.0);
  const auto alpha = ComparisonFunction::identity();
  const auto mu = ComparisonFunction::identity();
  SolveOptions sopt;
  sopt.dt = 1e-3;
  sopt.record_dt = 0.05;
  const auto rep = check_iiss_estimate(A, psi, nullptr, cases, alpha, mu, beta, 4.0, sopt, 1e-9);
  CHECK(rep.violations == 0);
  CHECK(rep.points > 0);
}

TEST_CASE("logarithmic certificate values and sandwich") {
  auto V = std::make_shared<LyapunovCertificate>(build_V(scalar_decay_family(), 1.0, 1.0, 8.0,
                                                         1e-3));
  CHECK_THROWS_AS(build_Z(V, std::nullopt), MissingLowerEnvelopeError);

  auto Z = build_Z(V, std::make_pair(1.0, 1.0));
  CHECK(Z(0.0, vec1(0.0)) == 0.0);
  CHECK(Z(0.0, vec1(1.0)) == doctest::Approx(std::log(1.5)).epsilon(1e-6));

  // For M = 1, lambda = 1 the lower and upper quadratic coefficients agree and
  // the sandwich collapses to equality: Z = ln(1 + x^2/2).
  REQUIRE(Z.lower_quad_coeff().has_value());
  CHECK(*Z.lower_quad_coeff() == doctest::Approx(Z.upper_quad_coeff()).epsilon(1e-12));
  std::mt19937_64 rng(47);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int i = 0; i < 20; ++i) {
    const double x = gauss(rng);
    const double z = Z(2.0, vec1(x));
    CHECK(z >= std::log1p(*Z.lower_quad_coeff() * x * x) - 1e-6);
    CHECK(z <= std::log1p(Z.upper_quad_coeff() * x * x) + 1e-6);
  }
}

TEST_CASE("logarithmic certificate dissipation on a bilinear example") {
  auto W = scalar_decay_family();
  ClassifyOptions copt;
  copt.fit_lower_envelope = true;
  copt.horizon = 8.0;
  const auto rep = W->classify(copt);
  REQUIRE(rep.uniformly_exponentially_stable);
  REQUIRE(rep.lower_envelope.has_value());

  auto V = std::make_shared<LyapunovCertificate>(build_V(W, rep.k, rep.w, 8.0, 1e-3));
  auto Z = build_Z(V, rep.lower_envelope);

  // x' = A x + B u + gamma x u with gamma = 0.5, delta = id.
  const double gamma = 0.5;
  auto A = TimeVaryingOperator::scalar_constant(-1.0);
  NonlinearTerm psi(1, 1, [gamma](double, const Eigen::VectorXd& x, const Eigen::VectorXd& u) {
    return Eigen::VectorXd::Constant(1, gamma * x(0) * u(0));
  });
  psi.with_bilinear_bound({gamma, ComparisonFunction::identity()});
  auto B = std::make_shared<const TimeVaryingOperator>(TimeVaryingOperator::scalar_constant(1.0));
  NonlinearTerm full(1, 1, [&psi, B](double t, const Eigen::VectorXd& x, const Eigen::VectorXd& u) {
    return Eigen::VectorXd((*B)(t)*u + psi(t, x, u));
  });

  const double k = rep.k, w = rep.w;
  const auto [M, lambda] = *rep.lower_envelope;
  const double eta = 0.5 * 2.0 * w / (k * k);
  const double upper = k * k / (2.0 * w);
  const double c_z = 2.0 * gamma * gamma * lambda / (M * M);

  auto u = std::make_shared<const InputSignal>(InputSignal::sine(0.4, 2.0));
  LieOptions opt;
  opt.h = 1e-4;
  std::mt19937_64 rng(53);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> tdist(0.0, 5.0);
  double scale = 0.0, worst = -1e300;
  for (int i = 0; i < 100; ++i) {
    const double t = tdist(rng);
    const Eigen::VectorXd x = vec1(2.0 * gauss(rng));
    const double nx = x.norm(), nu = u->value_norm(t);
    const auto est = lie_derivative(Z, A, full, t, x, *u, opt);
    const double rhs = -(1.0 - eta * k * k / (2.0 * w)) * nx * nx / (1.0 + upper * nx * nx) +
                       (k * k / (eta * w)) * 1.0 * nu * nu + c_z * nu * nu;
    worst = std::max(worst, est.value - rhs);
    scale = std::max(scale, std::max(nx * nx, nu * nu));
  }
  CHECK(worst <= 1e-2 * scale);
}
