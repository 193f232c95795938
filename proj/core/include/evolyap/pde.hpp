#pragma once

#include <Eigen/Core>
#include <functional>
#include <random>
#include <utility>

#include "evolyap/comparison.hpp"
#include "evolyap/evolution.hpp"
#include "evolyap/semilinear.hpp"

namespace evolyap {

// Uniform 1-D interior grid on (0, ell) with n interior points; the discrete
// L2 norm is sqrt(dz * sum x_i^2).
struct Grid1D {
  double ell = 1.0;
  int n = 128;

  double dz() const { return ell / static_cast<double>(n + 1); }
  double norm_weight() const { return dz(); }
  Eigen::VectorXd nodes() const;
  double l2_norm(const Eigen::VectorXd& x) const { return std::sqrt(dz() * x.squaredNorm()); }
};

// Fourth-order advection-free model with anti-diffusion rho, damping mu(t),
// and a state-proportional saturating input coupling, on (0,1) with clamped
// boundary values x = x' = 0 at both ends.
struct KSConfig {
  double rho = 0.0;
  std::function<double(double)> mu_fn = [](double) { return 0.0; };
  double mu_sup = 0.0;  // sampled bound of mu_fn, used for validation only
  Grid1D grid{1.0, 128};
};

// Heat equation x_t = nu x_zz + R(t) x + omega sin(z) x + u with Dirichlet
// boundary; R(t) = r cos(t) I by default (Hoelder continuous, sup norm r).
// The constant variant R = r I is the worst case within the same sup norm and
// is the one that actually crosses into growth when r + omega exceeds the
// decay threshold.
struct HeatConfig {
  enum class Reaction { CosineScalar, ConstantScalar };

  double nu = 1.0;
  double omega = 0.0;
  double r = 0.0;
  Grid1D grid{1.0, 128};
  Reaction reaction = Reaction::CosineScalar;
  // Optional replacement for the scalar reaction families.
  std::function<Eigen::MatrixXd(double)> R_fn;
};

// Discretized generator and nonlinearity for the fourth-order example:
// A = -(D4 + rho D2) with clamped ghost elimination, Psi the pointwise
// nonlinearity. The bilinear input bound (gamma = 1, delta = id) is recorded
// when mu == 0. Throws GridTooCoarseError below n = 8.
std::pair<TimeVaryingOperator, NonlinearTerm> ks_operator(const KSConfig& config);

// Smallest eigenvalue of the symmetric part of -A; its sign decides the
// logarithmic certificate's decay constant.
double ks_sigma(const KSConfig& config);

// The explicit certificate of the fourth-order example:
//   Z(t,x) = (1 + e^{-t}) |x|^2,  V = ln(1 + Z),
//   theta(s) = sigma s^2 / (1 + 2 s^2),  chi(s) = 2 s.
// Throws NotApplicableError when sigma <= 0.
struct KSCertificate {
  double sigma = 0.0;
  std::function<double(double, const Eigen::VectorXd&)> Z;
  std::function<double(double, const Eigen::VectorXd&)> V;
  ComparisonFunction theta = ComparisonFunction::identity();
  ComparisonFunction chi = ComparisonFunction::identity();

  // Sandwich |x|^2 <= Z(t,x) <= 2 |x|^2.
  bool sandwich_ok(double t, const Eigen::VectorXd& x, double norm_weight) const;
};
KSCertificate ks_certificate(const KSConfig& config);

// Heat generator A(t) = nu Laplacian + R(t) + omega diag(sin z) and the input
// term Psi = u (identity input operator on the grid; scalar inputs broadcast).
// The linear growth bound (a = r + |omega|, b = 1) is recorded.
std::pair<TimeVaryingOperator, NonlinearTerm> heat_operator(const HeatConfig& config);

// Smallest Rayleigh quotient |D_h x|^2 / |x|^2 of the discrete Dirichlet
// derivative, over random grid functions and the exact discrete minimizer;
// approaches pi^2/ell^2 from below as the grid refines.
double friedrichs_min_quotient(const Grid1D& grid, std::mt19937_64& rng, int probes = 100);

// True iff -2 nu pi^2/ell^2 + 2 (r + |omega|) + epsilon < 0.
bool heat_threshold_check(const HeatConfig& config, double epsilon);

// Discrete Dirichlet Laplacian (tridiagonal, negative definite) on the grid.
Eigen::MatrixXd dirichlet_laplacian(const Grid1D& grid);

}  // namespace evolyap
