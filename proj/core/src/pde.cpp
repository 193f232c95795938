#include "evolyap/pde.hpp"

#include <Eigen/Dense>
#include <cmath>

namespace evolyap {

namespace {

// Clamped fourth-derivative matrix: 5-point stencil with Dirichlet ghosts
// (x_0 = x_{n+1} = 0) and mirror ghosts from the Neumann traces
// (x_{-1} = x_1, x_{n+2} = x_n).
Eigen::MatrixXd clamped_fourth_derivative(const Grid1D& grid) {
  const int n = grid.n;
  const double c = 1.0 / std::pow(grid.dz(), 4);
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    auto add = [&](int j, double v) {
      if (j >= 0 && j < n) D(i, j) += v * c;
    };
    add(i - 2, 1.0);
    add(i - 1, -4.0);
    add(i, 6.0);
    add(i + 1, -4.0);
    add(i + 2, 1.0);
    if (i == 0) D(i, 0) += c;          // ghost x_{-1} = x_1
    if (i == n - 1) D(i, n - 1) += c;  // ghost x_{n+2} = x_n
  }
  return D;
}

}  // namespace

Eigen::VectorXd Grid1D::nodes() const {
  Eigen::VectorXd z(n);
  for (int i = 0; i < n; ++i) z(i) = dz() * static_cast<double>(i + 1);
  return z;
}

Eigen::MatrixXd dirichlet_laplacian(const Grid1D& grid) {
  const int n = grid.n;
  const double c = 1.0 / (grid.dz() * grid.dz());
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    L(i, i) = -2.0 * c;
    if (i > 0) L(i, i - 1) = c;
    if (i + 1 < n) L(i, i + 1) = c;
  }
  return L;
}

std::pair<TimeVaryingOperator, NonlinearTerm> ks_operator(const KSConfig& config) {
  if (config.grid.n < 8) throw GridTooCoarseError("ks_operator: needs n >= 8");
  const Grid1D grid = config.grid;
  const int n = grid.n;

  const Eigen::MatrixXd A =
      -(clamped_fourth_derivative(grid) + config.rho * dirichlet_laplacian(grid));
  TimeVaryingOperator op = TimeVaryingOperator::constant(A, grid.norm_weight());

  const Eigen::VectorXd z = grid.nodes();
  auto mu = config.mu_fn;
  NonlinearTerm psi(
      n, 1,
      [n, z, mu](double t, const Eigen::VectorXd& x, const Eigen::VectorXd& u) -> Eigen::VectorXd {
        const double mu_t = mu(t);
        if (mu_t < 0.0)
          throw std::invalid_argument("ks_operator: damping mu(t) must be nonnegative");
        const double st = std::abs(std::sin(t));
        Eigen::VectorXd out(n);
        for (int i = 0; i < n; ++i) {
          const double ui = u.size() == 1 ? u(0) : u(i);
          const double sat = 1.0 + std::exp(-z(i) * t) * x(i) * x(i);
          out(i) = -mu_t * x(i) + x(i) * st / sat * ui;
        }
        return out;
      });
  // Pointwise |x_i| |u| bound of the input coupling, since the saturation
  // denominator is >= 1; valid for the full term only without damping.
  bool mu_is_zero = true;
  for (double t = 0.0; t <= 20.0; t += 0.5)
    if (config.mu_fn(t) != 0.0) mu_is_zero = false;
  if (mu_is_zero)
    psi.with_bilinear_bound({1.0, ComparisonFunction::identity()});
  // The saturating coupling has x-derivative bounded by |u|, so
  // K(c, t_max) = mu_sup + c on the ball of radius c.
  psi.with_lipschitz_bound([mu_sup = config.mu_sup](double c, double) { return mu_sup + c; });
  return {std::move(op), std::move(psi)};
}

double ks_sigma(const KSConfig& config) {
  const auto [A, psi] = ks_operator(config);
  const Eigen::MatrixXd minus_a = -A(0.0);
  const Eigen::MatrixXd sym = 0.5 * (minus_a + minus_a.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

bool KSCertificate::sandwich_ok(double t, const Eigen::VectorXd& x, double norm_weight) const {
  const double n2 = norm_weight * x.squaredNorm();
  const double z = Z(t, x);
  return z >= n2 * (1.0 - 1e-12) && z <= 2.0 * n2 * (1.0 + 1e-12);
}

KSCertificate ks_certificate(const KSConfig& config) {
  const double sigma = ks_sigma(config);
  if (!(sigma > 0.0))
    throw NotApplicableError("ks_certificate: decay constant sigma(rho) is not positive");
  const double w = config.grid.norm_weight();

  KSCertificate cert;
  cert.sigma = sigma;
  cert.Z = [w](double t, const Eigen::VectorXd& x) {
    return (1.0 + std::exp(-t)) * w * x.squaredNorm();
  };
  cert.V = [Z = cert.Z](double t, const Eigen::VectorXd& x) { return std::log1p(Z(t, x)); };
  cert.theta = ComparisonFunction::custom(
      FunctionClass::P, [sigma](double s) { return sigma * s * s / (1.0 + 2.0 * s * s); });
  cert.chi = ComparisonFunction::linear(2.0);
  return cert;
}

std::pair<TimeVaryingOperator, NonlinearTerm> heat_operator(const HeatConfig& config) {
  if (config.grid.n < 8) throw GridTooCoarseError("heat_operator: needs n >= 8");
  const Grid1D grid = config.grid;
  const int n = grid.n;

  Eigen::MatrixXd M = config.nu * dirichlet_laplacian(grid);
  const Eigen::VectorXd z = grid.nodes();
  for (int i = 0; i < n; ++i) M(i, i) += config.omega * std::sin(z(i));

  const double laplacian_norm = 4.0 * config.nu / (grid.dz() * grid.dz());
  const double bound = laplacian_norm + config.r + std::abs(config.omega);

  TimeVaryingOperator op = [&]() {
    if (config.R_fn) {
      auto R = config.R_fn;
      return TimeVaryingOperator::general(
          n, [M, R](double t) -> Eigen::MatrixXd { return M + R(t); }, bound, {},
          grid.norm_weight());
    }
    if (config.reaction == HeatConfig::Reaction::ConstantScalar) {
      Eigen::MatrixXd Mc = M + config.r * Eigen::MatrixXd::Identity(n, n);
      return TimeVaryingOperator::constant(std::move(Mc), grid.norm_weight());
    }
    // The default family r cos(t) I commutes with everything, so the
    // propagator splits into exp(M dt) times a scalar factor.
    const double r = config.r;
    return TimeVaryingOperator::constant_plus_scalar(
        M, [r](double t) { return r * std::cos(t); }, [r](double t) { return r * std::sin(t); },
        bound, grid.norm_weight());
  }();

  NonlinearTerm psi(n, 1,
                    [n](double, const Eigen::VectorXd&, const Eigen::VectorXd& u) -> Eigen::VectorXd {
                      if (u.size() == 1) return Eigen::VectorXd::Constant(n, u(0));
                      return u;
                    });
  psi.with_linear_growth_bound({config.r + std::abs(config.omega), 1.0, 1e18});
  return {std::move(op), std::move(psi)};
}

double friedrichs_min_quotient(const Grid1D& grid, std::mt19937_64& rng, int probes) {
  const Eigen::MatrixXd L = -dirichlet_laplacian(grid);  // positive definite
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(L, Eigen::EigenvaluesOnly);
  double min_q = es.eigenvalues()(0);

  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int p = 0; p < probes; ++p) {
    Eigen::VectorXd x(grid.n);
    for (int i = 0; i < grid.n; ++i) x(i) = gauss(rng);
    const double q = x.dot(L * x) / x.squaredNorm();
    min_q = std::min(min_q, q);
  }
  return min_q;
}

bool heat_threshold_check(const HeatConfig& config, double epsilon) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("heat_threshold_check: epsilon must be > 0");
  const double pi = std::acos(-1.0);
  const double ell = config.grid.ell;
  return -2.0 * config.nu * pi * pi / (ell * ell) + 2.0 * (config.r + std::abs(config.omega)) +
             epsilon <
         0.0;
}

}  // namespace evolyap
