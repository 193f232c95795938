#include "evolyap/pde.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "doctest.h"
#include "evolyap/semilinear.hpp"

using namespace evolyap;

namespace {

// Smallest clamped-beam eigenvalue mu^4 with cos(mu) cosh(mu) = 1, found by
// bisection; independent oracle for the fourth-derivative discretization.
double clamped_beam_lambda1() {
  auto f = [](double m) { return std::cos(m) * std::cosh(m) - 1.0; };
  double lo = 4.5, hi = 5.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (f(lo) * f(mid) <= 0.0 ? hi : lo) = mid;
  }
  const double mu = 0.5 * (lo + hi);
  return mu * mu * mu * mu;
}

Eigen::VectorXd sample_on_grid(const Grid1D& grid, const std::function<double(double)>& f) {
  const auto z = grid.nodes();
  Eigen::VectorXd x(grid.n);
  for (int i = 0; i < grid.n; ++i) x(i) = f(z(i));
  return x;
}

}  // namespace

TEST_CASE("fourth-derivative matrix is symmetric for rho = 0") {
  KSConfig cfg;
  cfg.rho = 0.0;
  cfg.grid.n = 64;
  auto [A, psi] = ks_operator(cfg);
  const Eigen::MatrixXd M = A(0.0);
  CHECK((M - M.transpose()).norm() <= 1e-12 * M.norm());
}

TEST_CASE("discrete operator action converges at second order on a clamped polynomial") {
  // f = z^2 (1-z)^2 satisfies the clamped boundary conditions; analytic
  // derivatives f'' = 2 - 12 z + 12 z^2 and f'''' = 24. The symmetric mirror
  // stencil has modified boundary rows, so the pointwise order holds on the
  // interior; measure the restriction to z in [1/4, 3/4].
  const double rho = 7.0;
  auto error_at = [&](int n) {
    KSConfig cfg;
    cfg.rho = rho;
    cfg.grid.n = n;
    auto [A, psi] = ks_operator(cfg);
    const auto x = sample_on_grid(cfg.grid, [](double z) {
      return z * z * (1.0 - z) * (1.0 - z);
    });
    const auto image = sample_on_grid(cfg.grid, [&](double z) {
      const double f2 = 2.0 - 12.0 * z + 12.0 * z * z;
      return -(24.0 + rho * f2);
    });
    const Eigen::VectorXd diff = A(0.0) * x - image;
    const auto z = cfg.grid.nodes();
    double acc = 0.0;
    for (int i = 0; i < n; ++i)
      if (z(i) >= 0.25 && z(i) <= 0.75) acc += cfg.grid.dz() * diff(i) * diff(i);
    return std::sqrt(acc);
  };
  const double e64 = error_at(64), e128 = error_at(128);
  CHECK(e64 / e128 >= 2.5);  // O(dz^2)
  CHECK(e64 / e128 <= 6.0);
}

TEST_CASE("the nonlinearity vanishes at the origin") {
  KSConfig cfg;
  cfg.grid.n = 16;
  auto [A, psi] = ks_operator(cfg);
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(16);
  for (double u : {0.0, 1.0, -3.0}) {
    CHECK(psi(2.0, zero, Eigen::VectorXd::Constant(1, u)).norm() == 0.0);
  }

  HeatConfig hcfg;
  hcfg.grid.n = 16;
  auto [Ah, hpsi] = heat_operator(hcfg);
  CHECK(hpsi(1.0, zero, Eigen::VectorXd::Constant(1, 0.0)).norm() == 0.0);
}

TEST_CASE("decay constant against the clamped-beam oracle") {
  KSConfig cfg;
  cfg.rho = 0.0;
  cfg.grid.n = 128;
  const double sigma = ks_sigma(cfg);
  const double oracle = clamped_beam_lambda1();  // ~500.564
  CHECK(sigma == doctest::Approx(oracle).epsilon(0.01));
}

TEST_CASE("decay constant changes sign across the anti-diffusion threshold") {
  for (int n : {128, 256}) {
    KSConfig stable;
    stable.rho = 30.0;
    stable.grid.n = n;
    CHECK(ks_sigma(stable) > 0.0);

    KSConfig unstable;
    unstable.rho = 45.0;
    unstable.grid.n = n;
    CHECK(ks_sigma(unstable) < 0.0);
  }
}

TEST_CASE("decay constant saturates under grid refinement") {
  KSConfig a, b;
  a.rho = b.rho = 30.0;
  a.grid.n = 128;
  b.grid.n = 256;
  const double sa = ks_sigma(a), sb = ks_sigma(b);
  CHECK(std::abs(sa - sb) / std::abs(sb) < 0.01);
}

TEST_CASE("explicit certificate of the fourth-order example") {
  KSConfig cfg;
  cfg.rho = 30.0;
  cfg.grid.n = 64;
  const auto cert = ks_certificate(cfg);
  CHECK(cert.sigma > 0.0);

  // Unit-norm state: Z(0,x) = 2, V = ln 3; Z(t,x) -> |x|^2 as t -> inf.
  Eigen::VectorXd x = Eigen::VectorXd::Ones(cfg.grid.n);
  x /= cfg.grid.l2_norm(x);
  CHECK(cert.Z(0.0, x) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(cert.V(0.0, x) == doctest::Approx(std::log(3.0)).epsilon(1e-12));
  CHECK(cert.Z(50.0, x) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(cert.V(0.0, Eigen::VectorXd::Zero(cfg.grid.n)) == 0.0);

  // Sandwich |x|^2 <= Z <= 2|x|^2 on random states.
  std::mt19937_64 rng(61);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    Eigen::VectorXd y(cfg.grid.n);
    for (int i = 0; i < cfg.grid.n; ++i) y(i) = gauss(rng);
    const double t = 3.0 * std::abs(gauss(rng));
    CHECK(cert.sandwich_ok(t, y, cfg.grid.norm_weight()));
  }

  KSConfig bad;
  bad.rho = 45.0;
  bad.grid.n = 64;
  CHECK_THROWS_AS(ks_certificate(bad), NotApplicableError);
}

TEST_CASE("grids below the supported resolution are rejected") {
  KSConfig cfg;
  cfg.grid.n = 4;
  CHECK_THROWS_AS(ks_operator(cfg), GridTooCoarseError);
  HeatConfig hcfg;
  hcfg.grid.n = 4;
  CHECK_THROWS_AS(heat_operator(hcfg), GridTooCoarseError);
}

TEST_CASE("heat Laplacian eigenvalue matches the discrete closed form") {
  Grid1D grid{1.0, 128};
  const double nu = 1.0;
  const Eigen::MatrixXd L = -nu * dirichlet_laplacian(grid);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(L, Eigen::EigenvaluesOnly);
  const double lambda1 = es.eigenvalues()(0);
  // Exact discrete eigenvalue 4 nu/dz^2 sin^2(pi dz / (2 ell)).
  const double dz = grid.dz();
  const double pi = std::acos(-1.0);
  const double closed = 4.0 * nu / (dz * dz) * std::pow(std::sin(pi * dz / 2.0), 2);
  CHECK(lambda1 == doctest::Approx(closed).epsilon(1e-10));
  CHECK(lambda1 == doctest::Approx(pi * pi).epsilon(1e-3));
}

TEST_CASE("zero-input heat trajectories decay at the first Fourier rate") {
  HeatConfig cfg;
  cfg.grid.n = 128;
  cfg.omega = 0.0;
  cfg.r = 0.0;
  auto [A, psi] = heat_operator(cfg);
  EvolutionFamily W(A, Stepper::Exact, 1e-3);

  const auto x0 = sample_on_grid(cfg.grid, [](double z) { return std::sin(M_PI * z); });
  const double t = 0.2;
  const Eigen::VectorXd xt = W.propagate(0.0, t, x0);
  const double ratio = cfg.grid.l2_norm(xt) / cfg.grid.l2_norm(x0);
  CHECK(ratio == doctest::Approx(std::exp(-M_PI * M_PI * t)).epsilon(1e-3));
}

TEST_CASE("minimal derivative quotient against the eigensolve") {
  Grid1D grid{1.0, 128};
  std::mt19937_64 rng(67);
  const double q = friedrichs_min_quotient(grid, rng, 100);
  const double pi = std::acos(-1.0);
  CHECK(q >= pi * pi * (1.0 - 1e-3));
  CHECK(q <= pi * pi);

  // Homogeneity and the minimizing mode: the first discrete sine achieves the
  // minimum of the Rayleigh quotient.
  const Eigen::MatrixXd L = -dirichlet_laplacian(grid);
  const auto mode = sample_on_grid(grid, [&](double z) { return std::sin(pi * z); });
  const double q1 = mode.dot(L * mode) / mode.squaredNorm();
  const double q3 = (3.0 * mode).dot(L * (3.0 * mode)) / (3.0 * mode).squaredNorm();
  CHECK(q1 == doctest::Approx(q3).epsilon(1e-12));
  CHECK(q1 == doctest::Approx(q).epsilon(1e-9));
}

TEST_CASE("threshold arithmetic") {
  HeatConfig cfg;
  cfg.nu = 1.0;
  cfg.grid.ell = 1.0;

  cfg.r = 2.5;
  cfg.omega = 2.5;  // r + omega = 5 < pi^2
  CHECK(heat_threshold_check(cfg, 0.1));

  cfg.r = 6.0;
  cfg.omega = 6.0;  // 12 > pi^2
  CHECK_FALSE(heat_threshold_check(cfg, 0.1));

  const double pi = std::acos(-1.0);
  cfg.r = pi * pi - 0.01;
  cfg.omega = 0.0;
  CHECK(heat_threshold_check(cfg, 0.001));
}

TEST_CASE("discrete energy identity for the fourth-order operator") {
  KSConfig cfg;
  cfg.rho = 30.0;
  cfg.grid.n = 128;
  auto [A, psi] = ks_operator(cfg);
  const Grid1D& grid = cfg.grid;
  const double dz = grid.dz();

  auto check_function = [&](const std::function<double(double)>& f) {
    const auto x = sample_on_grid(grid, f);
    const double lhs = dz * x.dot(Eigen::VectorXd(-A(0.0) * x));

    // Discrete bending energy |D2 x|^2 with Dirichlet ghosts on the extended
    // node set, half-weighted at the two boundary nodes (there the mirror
    // ghosts make the second difference 2 x_1 / dz^2), minus rho |D1 x|^2
    // with boundary differences. With these weights the identity is exact.
    double d2 = 0.0, d1 = 0.0;
    d2 += 0.5 * dz * std::pow(2.0 * x(0) / (dz * dz), 2);
    d2 += 0.5 * dz * std::pow(2.0 * x(grid.n - 1) / (dz * dz), 2);
    for (int i = 0; i < grid.n; ++i) {
      const double xm = i > 0 ? x(i - 1) : 0.0;
      const double xp = i + 1 < grid.n ? x(i + 1) : 0.0;
      const double second = (xm - 2.0 * x(i) + xp) / (dz * dz);
      d2 += dz * second * second;
    }
    for (int i = 0; i <= grid.n; ++i) {
      const double xl = i > 0 ? x(i - 1) : 0.0;
      const double xr = i < grid.n ? x(i) : 0.0;
      const double first = (xr - xl) / dz;
      d1 += dz * first * first;
    }
    const double rhs = d2 - cfg.rho * d1;
    // Identity exact up to roundoff amplified by the 1/dz^4 scaling.
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-6));
  };
  check_function([](double z) { return z * z * (1.0 - z) * (1.0 - z); });
  check_function([](double z) { return 1.0 - std::cos(2.0 * M_PI * z); });
}

TEST_CASE("zero-input trajectories of the stable fourth-order system contract") {
  KSConfig cfg;
  cfg.rho = 30.0;
  cfg.grid.n = 64;
  auto [A, psi] = ks_operator(cfg);
  const double sigma = ks_sigma(cfg);
  REQUIRE(sigma > 0.0);

  const auto x0 = sample_on_grid(cfg.grid, [](double z) {
    return 1.0 - std::cos(2.0 * M_PI * z);
  });
  SolveOptions opt;
  opt.stepper = Stepper::ImplicitEuler;
  opt.dt = 1e-5;
  opt.record_dt = 1e-3;
  const auto traj = solve_mild(A, psi, 0.0, x0, InputSignal::zero(), 0.05, opt);
  REQUIRE_FALSE(traj.escaped);

  const auto cert = ks_certificate(cfg);
  for (std::size_t i = 1; i < traj.t.size(); ++i) {
    CHECK(traj.norm[i] <= traj.norm[i - 1] * (1.0 + 1e-12));
    // Z decays at least at rate 2 sigma up to discretization slack.
    const double dt = traj.t[i] - traj.t[i - 1];
    const double bound = cert.Z(traj.t[i - 1], traj.x[i - 1]) *
                         std::exp(-2.0 * sigma * (1.0 - 0.05) * dt);
    CHECK(cert.Z(traj.t[i], traj.x[i]) <= bound * (1.0 + 1e-9));
  }
}
