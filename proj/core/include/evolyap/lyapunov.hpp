#pragma once

#include <Eigen/Core>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "evolyap/comparison.hpp"
#include "evolyap/evolution.hpp"
#include "evolyap/semilinear.hpp"
#include "evolyap/signals.hpp"

namespace evolyap {

// Exponential majorant |W(t,s)| <= k exp(-w (t-s)).
struct UESConstants {
  double k = 1.0;
  double w = 1.0;
};

// Evaluator for the stability certificates:
//   V_integral  V(t,x) = int_t^inf |W(tau,t) x|^2 dtau, truncated at t + T
//               with a certified exponential tail bracket
//   P_quadratic V(t,x) = <P(t) x, x> from a tabulated operator family P
//   Z_log       Z(t,x) = ln(1 + V(t,x)) on top of a V_integral certificate
// Values are bracket midpoints; value_bracket exposes the certified interval.
// Certificates are immutable after construction and safe to share.
class LyapunovCertificate {
 public:
  enum class Kind { V_integral, P_quadratic, Z_log };

  struct Bracket {
    double lo = 0.0, hi = 0.0;
    double mid() const { return 0.5 * (lo + hi); }
    double width() const { return hi - lo; }
  };

  static LyapunovCertificate integral(std::shared_ptr<const EvolutionFamily> W, UESConstants ues,
                                      double tail_horizon, double quad_dt);
  // Tabulated operator family P(t), linearly interpolated between grid points
  // and extended by its end values; every P must be symmetric positive definite.
  static LyapunovCertificate quadratic(std::vector<double> t_grid,
                                       std::vector<Eigen::MatrixXd> P_table,
                                       double norm_weight = 1.0);
  static LyapunovCertificate log_of(std::shared_ptr<const LyapunovCertificate> inner, double M,
                                    double lambda);

  Kind kind() const { return kind_; }
  double operator()(double t, const Eigen::VectorXd& x) const { return value_bracket(t, x).mid(); }
  Bracket value_bracket(double t, const Eigen::VectorXd& x) const;

  double tail_horizon() const { return tail_horizon_; }
  UESConstants ues() const { return ues_; }
  // Quadratic sandwich coefficients: V <= upper |x|^2 always; lower |x|^2 <= V
  // available for Z_log certificates.
  double upper_quad_coeff() const { return ues_.k * ues_.k / (2.0 * ues_.w); }
  std::optional<double> lower_quad_coeff() const;

  Eigen::MatrixXd P_at(double t) const;

 private:
  LyapunovCertificate() = default;

  Kind kind_ = Kind::V_integral;
  std::shared_ptr<const EvolutionFamily> family_;
  UESConstants ues_;
  double tail_horizon_ = 0.0;
  double quad_dt_ = 1e-3;
  std::vector<double> p_grid_;
  std::vector<Eigen::MatrixXd> p_table_;
  double norm_weight_ = 1.0;
  std::shared_ptr<const LyapunovCertificate> inner_;
  double lower_m_ = 0.0, lower_lambda_ = 0.0;
};

// Non-coercive certificate from the truncated tail-energy quadrature; the
// family must be classified uniformly exponentially stable with majorant
// constants (k, w). Throws NotExponentiallyStableError otherwise.
LyapunovCertificate build_V(std::shared_ptr<const EvolutionFamily> W, double k, double w,
                            double T_tail_factor = 8.0, double quad_dt = 1e-3);

struct POperatorResult {
  LyapunovCertificate certificate;
  std::vector<double> residuals;  // |A(t)'P + PA + P' + I| per grid point
  double max_residual = 0.0;
};

// Coercive operator certificate P(t) = int_t^inf W' W dtau on a time grid,
// with the Lyapunov-equality residual evaluated by central differences.
// Requires a bounded generator (throws UnboundedGeneratorError).
POperatorResult build_P(const TimeVaryingOperator& A, const EvolutionFamily& W,
                        std::span<const double> t_grid, UESConstants ues,
                        double T_tail_factor = 8.0, double quad_dt = 1e-3, double fd_step = 1e-3);

// Coercive logarithmic certificate Z = ln(1 + V) from a validated lower norm
// envelope (M, lambda). Throws MissingLowerEnvelopeError.
LyapunovCertificate build_Z(std::shared_ptr<const LyapunovCertificate> V,
                            std::optional<std::pair<double, double>> lower_envelope);

struct LieOptions {
  double h = 1e-4;                // forward-difference step
  double richardson_slack = 0.05;
  SolveOptions solve;             // stepper for the short flow legs
};

struct LieEstimate {
  double value = 0.0;  // fine-step estimate
  double coarse = 0.0, fine = 0.0;
  bool richardson_ok = true;
};

// Forward-difference Lie derivative of the certificate along the flow of
// x' = A(t)x + psi(t,x,u), with an h vs h/2 consistency check. Throws
// EscapedError if the short trajectory blows up.
LieEstimate lie_derivative(const LyapunovCertificate& V, const TimeVaryingOperator& A,
                           const NonlinearTerm& psi, double t, const Eigen::VectorXd& x,
                           const InputSignal& u, const LieOptions& options);

// One evaluation point of an ensemble check.
struct EnsemblePoint {
  double t = 0.0;
  Eigen::VectorXd x;
  std::shared_ptr<const InputSignal> u;
};

struct DissipationRow {
  double t, norm_x, norm_u, V, Vdot, rhs, violation;
};

struct DissipationReport {
  std::vector<DissipationRow> rows;
  double max_violation = 0.0;
  double scale = 0.0;  // max over the ensemble of max(|x|^2, |u(t)|^2)
  double eta = 0.0;
  UESConstants ues;
  double B_sup = 0.0;
  // Both input-gain variants are surfaced; the squared one is the bound that
  // the rhs column uses.
  double squared_gain_coeff = 0.0;  // k^2 |B|^2 / (2 eta w)
  double linear_gain_coeff = 0.0;   // k^2 |B| / (2 eta w)
  bool all_richardson_ok = true;
};

// Dissipation inequality of the tail-energy certificate along the linear
// system x' = A(t)x + B(t)u:
//   Vdot <= -|x|^2 + (eta k^2 / 2w) |x|^2 + (k^2 / (2 eta w)) |B|^2 |u(t)|^2.
// eta must lie in (0, 2w/k^2); throws BadEtaError otherwise.
DissipationReport check_dissipation_iss(const LyapunovCertificate& V,
                                        const TimeVaryingOperator& A,
                                        std::shared_ptr<const TimeVaryingOperator> B,
                                        std::span<const EnsemblePoint> ensemble, double eta,
                                        const LieOptions& options);

struct ImplicationReport {
  int checked = 0, skipped = 0, violations = 0;
  double worst_margin = -std::numeric_limits<double>::infinity();  // max of Vdot + mu(V) - tol
};

// Implication-form check: whenever |x| >= kappa(|u|_sup) (and the point lies
// in the r1/r2 region), the Lie derivative must satisfy Vdot <= -mu(V) + tol.
// Points failing the gate are skipped.
ImplicationReport check_implication_liss(const LyapunovCertificate& V,
                                         const TimeVaryingOperator& A, const NonlinearTerm& psi,
                                         const ComparisonFunction& kappa,
                                         const ComparisonFunction& mu,
                                         std::span<const EnsemblePoint> ensemble, double r1,
                                         double r2, double tol, const LieOptions& options);

struct IissCase {
  double t0 = 0.0;
  Eigen::VectorXd x0;
  std::shared_ptr<const InputSignal> u;
};

struct EstimateReport {
  int points = 0;
  int violations = 0;
  double worst_ratio = 0.0;   // max of lhs / rhs
  double worst_excess = -std::numeric_limits<double>::infinity();  // max of lhs - rhs
};

// Trajectory estimate |phi(t)| <= beta(|x0|, t - t0) + alpha(int mu(|u|) ds) + tol
// checked at every recorded sample of every ensemble trajectory. When B is
// non-null the input enters as B(t)u in addition to psi.
EstimateReport check_iiss_estimate(const TimeVaryingOperator& A, const NonlinearTerm& psi,
                                   std::shared_ptr<const TimeVaryingOperator> B,
                                   std::span<const IissCase> ensemble,
                                   const ComparisonFunction& alpha, const ComparisonFunction& mu,
                                   const ComparisonFunction& beta, double t_end,
                                   const SolveOptions& solve, double tol);

}  // namespace evolyap
