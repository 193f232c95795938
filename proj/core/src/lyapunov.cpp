#include "evolyap/lyapunov.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

namespace evolyap {

namespace {

NonlinearTerm combine_input(const NonlinearTerm& psi,
                            std::shared_ptr<const TimeVaryingOperator> B) {
  if (!B) return psi;
  const int n = psi.state_dim();
  return NonlinearTerm(
      n, psi.input_dim(),
      [psi, B](double t, const Eigen::VectorXd& x, const Eigen::VectorXd& u) -> Eigen::VectorXd {
        return (*B)(t)*u + psi(t, x, u);
      });
}

double sampled_operator_sup(const TimeVaryingOperator& op, double t_max = 20.0) {
  double sup = 0.0;
  for (double t = 0.0; t <= t_max; t += 0.25) sup = std::max(sup, spectral_norm(op(t)));
  return sup;
}

}  // namespace

LyapunovCertificate LyapunovCertificate::integral(std::shared_ptr<const EvolutionFamily> W,
                                                  UESConstants ues, double tail_horizon,
                                                  double quad_dt) {
  LyapunovCertificate c;
  c.kind_ = Kind::V_integral;
  c.family_ = std::move(W);
  c.ues_ = ues;
  c.tail_horizon_ = tail_horizon;
  c.quad_dt_ = quad_dt;
  c.norm_weight_ = c.family_->norm_weight();
  return c;
}

LyapunovCertificate LyapunovCertificate::quadratic(std::vector<double> t_grid,
                                                   std::vector<Eigen::MatrixXd> P_table,
                                                   double norm_weight) {
  if (t_grid.size() != P_table.size() || t_grid.empty())
    throw std::invalid_argument("quadratic certificate needs matching nonempty tables");
  if (!std::is_sorted(t_grid.begin(), t_grid.end()))
    throw std::invalid_argument("quadratic certificate grid must be sorted");
  for (const auto& P : P_table) {
    if ((P - P.transpose()).norm() > 1e-9 * (1.0 + P.norm()))
      throw std::invalid_argument("quadratic certificate needs symmetric P(t)");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(P);
    if (es.eigenvalues()(0) <= 0.0)
      throw std::invalid_argument("quadratic certificate needs positive definite P(t)");
  }
  LyapunovCertificate c;
  c.kind_ = Kind::P_quadratic;
  c.p_grid_ = std::move(t_grid);
  c.p_table_ = std::move(P_table);
  c.norm_weight_ = norm_weight;
  return c;
}

LyapunovCertificate LyapunovCertificate::log_of(std::shared_ptr<const LyapunovCertificate> inner,
                                                double M, double lambda) {
  if (!inner || inner->kind() != Kind::V_integral)
    throw std::invalid_argument("log certificate wraps a V_integral certificate");
  LyapunovCertificate c;
  c.kind_ = Kind::Z_log;
  c.inner_ = std::move(inner);
  c.ues_ = c.inner_->ues_;
  c.tail_horizon_ = c.inner_->tail_horizon_;
  c.lower_m_ = M;
  c.lower_lambda_ = lambda;
  return c;
}

std::optional<double> LyapunovCertificate::lower_quad_coeff() const {
  if (kind_ != Kind::Z_log) return std::nullopt;
  // Direct integration of the lower envelope: int M^2 exp(-2 lambda s) ds.
  return lower_m_ * lower_m_ / (2.0 * lower_lambda_);
}

Eigen::MatrixXd LyapunovCertificate::P_at(double t) const {
  if (kind_ != Kind::P_quadratic) throw std::invalid_argument("P_at: not a quadratic certificate");
  if (t <= p_grid_.front()) return p_table_.front();
  if (t >= p_grid_.back()) return p_table_.back();
  auto it = std::upper_bound(p_grid_.begin(), p_grid_.end(), t);
  const std::size_t i = static_cast<std::size_t>(it - p_grid_.begin());
  const double w = (t - p_grid_[i - 1]) / (p_grid_[i] - p_grid_[i - 1]);
  return (1.0 - w) * p_table_[i - 1] + w * p_table_[i];
}

LyapunovCertificate::Bracket LyapunovCertificate::value_bracket(double t,
                                                                const Eigen::VectorXd& x) const {
  switch (kind_) {
    case Kind::P_quadratic: {
      const double v = norm_weight_ * x.dot(P_at(t) * x);
      return {v, v};
    }
    case Kind::Z_log: {
      const Bracket b = inner_->value_bracket(t, x);
      return {std::log1p(b.lo), std::log1p(b.hi)};
    }
    case Kind::V_integral:
      break;
  }
  // Composite Simpson of |W(tau,t)x|^2 over [t, t+T] plus the certified tail
  // bracket [0, (k^2/2w) |W(t+T,t)x|^2].
  long n = std::max(2L, lround(tail_horizon_ / quad_dt_));
  if (n % 2 == 1) ++n;
  const double h = tail_horizon_ / static_cast<double>(n);
  Eigen::VectorXd y = x;
  double sum = norm_weight_ * y.squaredNorm();
  for (long j = 1; j <= n; ++j) {
    y = family_->propagate(t + static_cast<double>(j - 1) * h, t + static_cast<double>(j) * h, y);
    const double f = norm_weight_ * y.squaredNorm();
    sum += (j == n ? 1.0 : (j % 2 == 1 ? 4.0 : 2.0)) * f;
  }
  const double quad = h / 3.0 * sum;
  const double tail_hi = upper_quad_coeff() * norm_weight_ * y.squaredNorm();
  return {quad, quad + tail_hi};
}

LyapunovCertificate build_V(std::shared_ptr<const EvolutionFamily> W, double k, double w,
                            double T_tail_factor, double quad_dt) {
  if (!(k > 0.0) || !(w > 0.0))
    throw NotExponentiallyStableError(
        "build_V: needs uniform exponential stability constants k, w > 0");
  if (!(T_tail_factor >= 5.0)) throw std::invalid_argument("build_V: T_tail_factor must be >= 5");
  return LyapunovCertificate::integral(std::move(W), {k, w}, T_tail_factor / w, quad_dt);
}

POperatorResult build_P(const TimeVaryingOperator& A, const EvolutionFamily& W,
                        std::span<const double> t_grid, UESConstants ues, double T_tail_factor,
                        double quad_dt, double fd_step) {
  if (!A.bound_sup())
    throw UnboundedGeneratorError("build_P: generator family must be uniformly bounded");
  if (!(ues.k > 0.0) || !(ues.w > 0.0))
    throw NotExponentiallyStableError("build_P: needs k, w > 0");
  if (t_grid.empty()) throw std::invalid_argument("build_P: empty time grid");

  const int n = W.dim();
  const double T = T_tail_factor / ues.w;
  const double tail_coeff = ues.k * ues.k / (2.0 * ues.w);

  auto P_of = [&](double t) {
    long m = std::max(2L, lround(T / quad_dt));
    if (m % 2 == 1) ++m;
    const double h = T / static_cast<double>(m);
    Eigen::MatrixXd Wj = Eigen::MatrixXd::Identity(n, n);
    Eigen::MatrixXd sum = Wj.transpose() * Wj;
    for (long j = 1; j <= m; ++j) {
      Wj = W.matrix(t + static_cast<double>(j - 1) * h, t + static_cast<double>(j) * h) * Wj;
      const double c = (j == m ? 1.0 : (j % 2 == 1 ? 4.0 : 2.0));
      sum += c * (Wj.transpose() * Wj);
    }
    Eigen::MatrixXd quad = h / 3.0 * sum;
    // Certified operator tail: int_{t+T}^inf W'W <= tail_coeff * W_end' W_end;
    // take the bracket midpoint.
    quad += 0.5 * tail_coeff * (Wj.transpose() * Wj);
    return quad;
  };

  POperatorResult result{LyapunovCertificate::quadratic({0.0}, {Eigen::MatrixXd::Identity(n, n)},
                                                        A.norm_weight()),
                         {}, 0.0};
  std::vector<double> grid(t_grid.begin(), t_grid.end());
  std::vector<Eigen::MatrixXd> table;
  table.reserve(grid.size());
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
  for (double t : grid) {
    const Eigen::MatrixXd P = P_of(t);
    Eigen::MatrixXd Pdot;
    if (t >= fd_step) {
      Pdot = (P_of(t + fd_step) - P_of(t - fd_step)) / (2.0 * fd_step);
    } else {
      Pdot = (P_of(t + fd_step) - P) / fd_step;
    }
    const Eigen::MatrixXd At = A(t);
    const double res = (At.transpose() * P + P * At + Pdot + I).norm();
    result.residuals.push_back(res);
    result.max_residual = std::max(result.max_residual, res);
    table.push_back(P);
  }
  result.certificate = LyapunovCertificate::quadratic(std::move(grid), std::move(table),
                                                      A.norm_weight());
  return result;
}

LyapunovCertificate build_Z(std::shared_ptr<const LyapunovCertificate> V,
                            std::optional<std::pair<double, double>> lower_envelope) {
  if (!lower_envelope || !(lower_envelope->first > 0.0) || !(lower_envelope->second > 0.0))
    throw MissingLowerEnvelopeError("build_Z: needs a validated lower envelope (M, lambda)");
  return LyapunovCertificate::log_of(std::move(V), lower_envelope->first, lower_envelope->second);
}

LieEstimate lie_derivative(const LyapunovCertificate& V, const TimeVaryingOperator& A,
                           const NonlinearTerm& psi, double t, const Eigen::VectorXd& x,
                           const InputSignal& u, const LieOptions& options) {
  const double h = options.h;
  if (!(h > 0.0)) throw std::invalid_argument("lie_derivative: h must be > 0");

  SolveOptions solve = options.solve;
  solve.dt = std::min(solve.dt, h / 8.0);
  solve.record_dt = 0.0;

  const Trajectory leg = solve_mild(A, psi, t, x, u, t + h, solve);
  if (leg.escaped) throw EscapedError("lie_derivative: trajectory escaped on [t, t+h]");
  const double v0 = V(t, x);

  auto quotient = [&](double step) {
    // The h/2 state is a recorded lattice point of the same leg.
    const Trajectory fine = solve_mild(A, psi, t, x, u, t + step, solve);
    if (fine.escaped) throw EscapedError("lie_derivative: trajectory escaped on [t, t+h]");
    return (V(t + step, fine.final_state()) - v0) / step;
  };

  LieEstimate est;
  est.coarse = (V(t + h, leg.final_state()) - v0) / h;
  est.fine = quotient(0.5 * h);
  est.value = est.fine;
  est.richardson_ok =
      std::abs(est.coarse - est.fine) <= options.richardson_slack * (1.0 + std::abs(est.fine));
  return est;
}

DissipationReport check_dissipation_iss(const LyapunovCertificate& V,
                                        const TimeVaryingOperator& A,
                                        std::shared_ptr<const TimeVaryingOperator> B,
                                        std::span<const EnsemblePoint> ensemble, double eta,
                                        const LieOptions& options) {
  const UESConstants ues = V.ues();
  const double eta_max = 2.0 * ues.w / (ues.k * ues.k);
  if (!(eta > 0.0) || !(eta < eta_max))
    throw BadEtaError("check_dissipation_iss: eta must lie in (0, 2w/k^2)");

  DissipationReport rep;
  rep.eta = eta;
  rep.ues = ues;
  rep.B_sup = B->bound_sup() ? *B->bound_sup() : sampled_operator_sup(*B);
  rep.squared_gain_coeff =
      ues.k * ues.k * rep.B_sup * rep.B_sup / (2.0 * eta * ues.w);
  rep.linear_gain_coeff = ues.k * ues.k * rep.B_sup / (2.0 * eta * ues.w);
  rep.max_violation = -std::numeric_limits<double>::infinity();

  const NonlinearTerm psi = NonlinearTerm::input_map(B);
  const double state_coeff = -1.0 + eta * ues.k * ues.k / (2.0 * ues.w);
  const double sw = std::sqrt(A.norm_weight());

  for (const auto& pt : ensemble) {
    const LieEstimate lie = lie_derivative(V, A, psi, pt.t, pt.x, *pt.u, options);
    rep.all_richardson_ok = rep.all_richardson_ok && lie.richardson_ok;
    const double nx = sw * pt.x.norm();
    const double nu = pt.u->value_norm(pt.t);
    const double rhs = state_coeff * nx * nx + rep.squared_gain_coeff * nu * nu;
    DissipationRow row{pt.t, nx, nu, V(pt.t, pt.x), lie.value, rhs, lie.value - rhs};
    rep.max_violation = std::max(rep.max_violation, row.violation);
    rep.scale = std::max(rep.scale, std::max(nx * nx, nu * nu));
    rep.rows.push_back(row);
  }
  return rep;
}

ImplicationReport check_implication_liss(const LyapunovCertificate& V,
                                         const TimeVaryingOperator& A, const NonlinearTerm& psi,
                                         const ComparisonFunction& kappa,
                                         const ComparisonFunction& mu,
                                         std::span<const EnsemblePoint> ensemble, double r1,
                                         double r2, double tol, const LieOptions& options) {
  ImplicationReport rep;
  const double sw = std::sqrt(A.norm_weight());
  for (const auto& pt : ensemble) {
    const double nx = sw * pt.x.norm();
    const double nu = pt.u->sup_norm();
    if (nx > r1 || nu > r2 || nx < kappa(nu)) {
      ++rep.skipped;
      continue;
    }
    const LieEstimate lie = lie_derivative(V, A, psi, pt.t, pt.x, *pt.u, options);
    const double margin = lie.value + mu(V(pt.t, pt.x)) - tol;
    rep.worst_margin = std::max(rep.worst_margin, margin);
    if (margin > 0.0) ++rep.violations;
    ++rep.checked;
  }
  return rep;
}

EstimateReport check_iiss_estimate(const TimeVaryingOperator& A, const NonlinearTerm& psi,
                                   std::shared_ptr<const TimeVaryingOperator> B,
                                   std::span<const IissCase> ensemble,
                                   const ComparisonFunction& alpha, const ComparisonFunction& mu,
                                   const ComparisonFunction& beta, double t_end,
                                   const SolveOptions& solve, double tol) {
  if (!beta.is_kl()) throw std::invalid_argument("check_iiss_estimate: beta must be class KL");
  const NonlinearTerm full = combine_input(psi, std::move(B));
  const double sw = std::sqrt(A.norm_weight());

  EstimateReport rep;
  for (const auto& c : ensemble) {
    const Trajectory traj = solve_mild(A, full, c.t0, c.x0, *c.u, t_end, solve);
    if (traj.escaped) throw EscapedError("check_iiss_estimate: trajectory escaped");
    const double x0_norm = sw * c.x0.norm();
    double input_energy = 0.0;
    for (std::size_t i = 0; i < traj.t.size(); ++i) {
      if (i > 0) input_energy += energy(*c.u, mu, traj.t[i - 1], traj.t[i]);
      const double lhs = traj.norm[i];
      const double rhs = beta(x0_norm, traj.t[i] - c.t0) + alpha(input_energy) + tol;
      ++rep.points;
      if (lhs > rhs) ++rep.violations;
      rep.worst_excess = std::max(rep.worst_excess, lhs - rhs);
      if (rhs > 0.0) rep.worst_ratio = std::max(rep.worst_ratio, lhs / rhs);
    }
  }
  return rep;
}

}  // namespace evolyap
