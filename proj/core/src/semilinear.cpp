#include "evolyap/semilinear.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>
#include <unsupported/Eigen/MatrixFunctions>

namespace evolyap {

namespace {

constexpr double kTimeEps = 1e-12;

}  // namespace

NonlinearTerm::NonlinearTerm(int state_dim, int input_dim, EvalFn eval)
    : state_dim_(state_dim), input_dim_(input_dim), eval_(std::move(eval)) {
  if (state_dim_ < 1 || input_dim_ < 1)
    throw std::invalid_argument("NonlinearTerm: dimensions must be positive");
}

NonlinearTerm NonlinearTerm::zero(int state_dim, int input_dim) {
  return NonlinearTerm(state_dim, input_dim,
                       [state_dim](double, const Eigen::VectorXd&, const Eigen::VectorXd&) {
                         return Eigen::VectorXd::Zero(state_dim);
                       });
}

NonlinearTerm NonlinearTerm::input_map(std::shared_ptr<const TimeVaryingOperator> B) {
  const int n = B->dim();
  return NonlinearTerm(
      n, n, [B](double t, const Eigen::VectorXd&, const Eigen::VectorXd& u) -> Eigen::VectorXd {
        if (u.size() != B->dim())
          throw std::invalid_argument("input_map: input dimension must match the operator");
        return (*B)(t)*u;
      });
}

NonlinearTerm& NonlinearTerm::with_lipschitz_bound(std::function<double(double, double)> bound) {
  lipschitz_ = std::move(bound);
  return *this;
}

NonlinearTerm& NonlinearTerm::with_linear_growth_bound(LinearGrowthBound b) {
  linear_growth_ = std::move(b);
  return *this;
}

NonlinearTerm& NonlinearTerm::with_bilinear_bound(BilinearBound b) {
  bilinear_ = std::move(b);
  return *this;
}

bool NonlinearTerm::verify_bounds(std::mt19937_64& rng, int samples, double state_weight,
                                  double input_weight) const {
  if (!linear_growth_ && !bilinear_) return true;
  std::uniform_real_distribution<double> time_dist(0.0, 10.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double sx = std::sqrt(state_weight), su = std::sqrt(input_weight);
  for (int i = 0; i < samples; ++i) {
    const double t = time_dist(rng);
    Eigen::VectorXd x(state_dim_), u(input_dim_);
    for (int j = 0; j < state_dim_; ++j) x(j) = gauss(rng);
    for (int j = 0; j < input_dim_; ++j) u(j) = gauss(rng);
    if (linear_growth_) {
      const double rho = linear_growth_->rho;
      if (sx * x.norm() > rho && x.norm() > 0.0) x *= rho / (sx * x.norm() * 2.0);
      if (su * u.norm() > rho && u.norm() > 0.0) u *= rho / (su * u.norm() * 2.0);
    }
    const double psi_norm = sx * eval_(t, x, u).norm();
    const double nx = sx * x.norm(), nu = su * u.norm();
    if (linear_growth_) {
      if (psi_norm > linear_growth_->a * nx + linear_growth_->b * nu + 1e-9) return false;
    }
    if (bilinear_) {
      if (psi_norm > bilinear_->gamma * nx * bilinear_->delta(nu) + 1e-9) return false;
    }
  }
  return true;
}

double Trajectory::norm_at(double time) const {
  if (t.empty()) throw std::invalid_argument("empty trajectory");
  if (time <= t.front()) return norm.front();
  if (time >= t.back()) return norm.back();
  auto it = std::upper_bound(t.begin(), t.end(), time);
  const std::size_t i = static_cast<std::size_t>(it - t.begin());
  const double wgt = (time - t[i - 1]) / (t[i] - t[i - 1]);
  return norm[i - 1] + wgt * (norm[i] - norm[i - 1]);
}

double Trajectory::max_norm() const {
  return norm.empty() ? 0.0 : *std::max_element(norm.begin(), norm.end());
}

Trajectory solve_mild(const TimeVaryingOperator& A, const NonlinearTerm& psi, double t0,
                      const Eigen::VectorXd& x0, const InputSignal& u, double t_end,
                      const SolveOptions& options) {
  if (!(options.dt > 0.0)) throw std::invalid_argument("solve_mild: dt must be > 0");
  if (!(t_end > t0)) throw std::invalid_argument("solve_mild: t_end must exceed t0");
  if (x0.size() != A.dim()) throw std::invalid_argument("solve_mild: state dimension mismatch");

  // Step boundaries: dt lattice plus every discontinuity of u and A.
  std::vector<double> bounds{t0, t_end};
  const long k0 = static_cast<long>(std::floor(t0 / options.dt)) + 1;
  for (long k = k0;; ++k) {
    const double tk = static_cast<double>(k) * options.dt;
    if (tk >= t_end - kTimeEps) break;
    if (tk > t0 + kTimeEps) bounds.push_back(tk);
  }
  for (double b : u.breakpoints_in(t0, t_end)) bounds.push_back(b);
  for (double b : A.breakpoints_in(t0, t_end)) bounds.push_back(b);
  std::sort(bounds.begin(), bounds.end());
  bounds.erase(std::unique(bounds.begin(), bounds.end(),
                           [](double a, double b) { return std::abs(a - b) < kTimeEps; }),
               bounds.end());

  const double sw = std::sqrt(A.norm_weight());
  const long record_every =
      options.record_dt > 0.0 ? std::max(1L, lround(options.record_dt / options.dt)) : 1L;

  Trajectory traj;
  traj.t0 = t0;
  auto record = [&](double t, const Eigen::VectorXd& x) {
    traj.t.push_back(t);
    traj.x.push_back(x);
    traj.norm.push_back(sw * x.norm());
  };

  Eigen::VectorXd x = x0;
  record(t0, x);

  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(A.dim(), A.dim());
  using Form = TimeVaryingOperator::Form;
  // Constant generators with a repeated step size reuse one factorization;
  // the exact stepper likewise caches its per-step-size propagator.
  const bool const_A = A.form() == Form::Constant;
  const Eigen::MatrixXd A0 = const_A ? A(0.0) : Eigen::MatrixXd();
  double cached_h = -1.0;
  Eigen::PartialPivLU<Eigen::MatrixXd> cached_lu;
  std::map<long long, Eigen::MatrixXd> expm_cache;
  auto exact_propagator = [&](double a, double b) -> Eigen::MatrixXd {
    switch (A.form()) {
      case Form::PiecewiseScalar:
        return Eigen::MatrixXd::Constant(1, 1, std::exp(A.scalar_integral(a, b)));
      case Form::Constant:
      case Form::ConstantPlusScalar: {
        const long long key = llround((b - a) / 1e-12);
        auto it = expm_cache.find(key);
        if (it == expm_cache.end())
          it = expm_cache.emplace(key, Eigen::MatrixXd((A.constant_part() * (b - a)).exp()))
                   .first;
        if (A.form() == Form::ConstantPlusScalar)
          return std::exp(A.scalar_shift_integral(a, b)) * it->second;
        return it->second;
      }
      case Form::General:
        break;
    }
    throw std::invalid_argument("solve_mild: exact stepper needs a closed-form generator");
  };
  int slope_violations = 0;
  for (std::size_t i = 0; i + 1 < bounds.size(); ++i) {
    const double a = bounds[i], b = bounds[i + 1], h = b - a;
    // Values at the right endpoint of a step use the left limit so that each
    // step integrates a single continuity piece of u and A.
    auto u_at = [&](double s) { return u.value(s, s >= b - kTimeEps ? Side::Left : Side::Right); };
    auto rhs = [&](double s, const Eigen::VectorXd& y, Side a_side) -> Eigen::VectorXd {
      return A.eval(s, a_side) * y + psi(s, y, u_at(s));
    };

    Eigen::VectorXd x_new;
    if (options.stepper == Stepper::RK4) {
      const Eigen::VectorXd k1 = rhs(a, x, Side::Right);
      const Eigen::VectorXd k2 = rhs(a + 0.5 * h, x + 0.5 * h * k1, Side::Right);
      const Eigen::VectorXd k3 = rhs(a + 0.5 * h, x + 0.5 * h * k2, Side::Right);
      const Eigen::VectorXd k4 = rhs(b, x + h * k3, Side::Left);
      x_new = x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    } else if (options.stepper == Stepper::ImplicitEuler) {
      // Stiff linear part implicit, nonlinearity explicit at the left point.
      const Eigen::VectorXd rhs_vec = x + h * psi(a, x, u_at(a));
      if (const_A) {
        // Lattice step sizes agree only up to roundoff; reuse within 1e-12.
        if (std::abs(h - cached_h) > 1e-12 * std::max(h, cached_h)) {
          cached_lu.compute(I - h * A0);
          cached_h = h;
        }
        x_new = cached_lu.solve(rhs_vec);
      } else {
        const Eigen::MatrixXd Ab = A.eval(b, Side::Left);
        x_new = (I - h * Ab).partialPivLu().solve(rhs_vec);
      }
    } else {
      // Exponential Euler: exact linear propagator, nonlinearity explicit.
      x_new = exact_propagator(a, b) * (x + h * psi(a, x, u_at(a)));
    }

    const double prev_norm = sw * x.norm();
    const double step_norm = sw * (x_new - x).norm();
    if (std::isfinite(step_norm) && step_norm > options.local_slope_cap * (1.0 + prev_norm)) {
      if (++slope_violations >= 3)
        throw StepTooLargeError("solve_mild: local increment persistently exceeds the slope cap");
    } else {
      slope_violations = 0;
    }

    x = std::move(x_new);
    const double nrm = sw * x.norm();
    const bool blown = !std::isfinite(nrm) || nrm > options.blowup_cap;
    const bool is_record_step =
        blown || (i + 2 == bounds.size()) ||
        (static_cast<long>(i + 1) % record_every == 0);
    if (is_record_step) record(b, x);
    if (blown) {
      traj.escaped = true;
      traj.t_escape = b;
      break;
    }
  }
  return traj;
}

double check_cocycle(const TimeVaryingOperator& A, const NonlinearTerm& psi, double t0,
                     const Eigen::VectorXd& x0, const InputSignal& u, double t_mid, double t_end,
                     const SolveOptions& options) {
  if (!(t0 < t_mid && t_mid < t_end))
    throw std::invalid_argument("check_cocycle: needs t0 < t_mid < t_end");
  const Trajectory full = solve_mild(A, psi, t0, x0, u, t_end, options);
  if (full.escaped) throw EscapedError("check_cocycle: trajectory escaped");
  const Trajectory head = solve_mild(A, psi, t0, x0, u, t_mid, options);
  if (head.escaped) throw EscapedError("check_cocycle: trajectory escaped");
  const Trajectory tail = solve_mild(A, psi, t_mid, head.final_state(), u, t_end, options);
  if (tail.escaped) throw EscapedError("check_cocycle: trajectory escaped");
  return std::sqrt(A.norm_weight()) * (tail.final_state() - full.final_state()).norm();
}

bool check_causality(const TimeVaryingOperator& A, const NonlinearTerm& psi, double t0,
                     const Eigen::VectorXd& x0, const InputSignal& u1, const InputSignal& u2,
                     double t, const SolveOptions& options) {
  const Trajectory a = solve_mild(A, psi, t0, x0, u1, t, options);
  const Trajectory b = solve_mild(A, psi, t0, x0, u2, t, options);
  if (a.escaped || b.escaped) return false;
  return std::sqrt(A.norm_weight()) * (a.final_state() - b.final_state()).norm() <= 1e-10;
}

Eigen::VectorXd variation_of_constants(const EvolutionFamily& W, const TimeVaryingOperator& B,
                                       double t0, const Eigen::VectorXd& x0, const InputSignal& u,
                                       double t, double quad_dt) {
  // Composite Simpson node grid split at input breakpoints, each span with an
  // even panel count.
  std::vector<double> cuts{t0, t};
  for (double b : u.breakpoints_in(t0, t)) cuts.push_back(b);
  std::sort(cuts.begin(), cuts.end());

  std::vector<double> nodes;
  std::vector<double> weights;  // Simpson weights scaled by h/3 per span
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double a = cuts[i], b = cuts[i + 1];
    long panels = std::max(2L, lround((b - a) / quad_dt));
    if (panels % 2 == 1) ++panels;
    const double h = (b - a) / static_cast<double>(panels);
    for (long j = 0; j <= panels; ++j) {
      const double wgt = h / 3.0 * (j == 0 || j == panels ? 1.0 : (j % 2 == 1 ? 4.0 : 2.0));
      nodes.push_back(a + static_cast<double>(j) * h);
      weights.push_back(wgt);
    }
  }

  // Left propagator factors W(t, s_j) accumulated from s = t backwards, one
  // short-span propagator per node.
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(W.dim());
  Eigen::MatrixXd left = Eigen::MatrixXd::Identity(W.dim(), W.dim());
  double reached = t;
  for (std::size_t j = nodes.size(); j-- > 0;) {
    const double s = nodes[j];
    if (s < reached) {
      left = left * W.matrix(s, reached);
      reached = s;
    }
    const Side side =
        (j + 1 == nodes.size() || nodes[j + 1] == s) ? Side::Left : Side::Right;
    acc += weights[j] * (left * (B.eval(s, side) * u.value(s, side)));
  }
  return W.matrix(t0, t) * x0 + acc;
}

}  // namespace evolyap
