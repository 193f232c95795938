#pragma once

#include <Eigen/Core>
#include <functional>
#include <memory>
#include <optional>
#include <random>

#include "evolyap/evolution.hpp"
#include "evolyap/signals.hpp"

namespace evolyap {

// Nonlinear term Psi(t, x, u) of a semi-linear system x' = A(t)x + Psi(t,x,u),
// with optional recorded growth bounds used by the certificate machinery.
class NonlinearTerm {
 public:
  using EvalFn =
      std::function<Eigen::VectorXd(double t, const Eigen::VectorXd& x, const Eigen::VectorXd& u)>;

  // |Psi(t,x,u)| <= a |x| + b |u| for |x|, |u| <= rho.
  struct LinearGrowthBound {
    double a = 0.0, b = 0.0, rho = 0.0;
  };
  // |Psi(t,x,u)| <= gamma |x| delta(|u|).
  struct BilinearBound {
    double gamma = 0.0;
    ComparisonFunction delta = ComparisonFunction::identity();
  };

  NonlinearTerm(int state_dim, int input_dim, EvalFn eval);
  static NonlinearTerm zero(int state_dim, int input_dim = 1);
  // Input term of a linear system: Psi(t, x, u) = B(t) u.
  static NonlinearTerm input_map(std::shared_ptr<const TimeVaryingOperator> B);

  int state_dim() const { return state_dim_; }
  int input_dim() const { return input_dim_; }

  Eigen::VectorXd operator()(double t, const Eigen::VectorXd& x, const Eigen::VectorXd& u) const {
    return eval_(t, x, u);
  }

  NonlinearTerm& with_lipschitz_bound(std::function<double(double c, double t_max)> bound);
  NonlinearTerm& with_linear_growth_bound(LinearGrowthBound b);
  NonlinearTerm& with_bilinear_bound(BilinearBound b);

  const std::function<double(double, double)>& lipschitz_bound() const { return lipschitz_; }
  const std::optional<LinearGrowthBound>& linear_growth_bound() const { return linear_growth_; }
  const std::optional<BilinearBound>& bilinear_bound() const { return bilinear_; }

  // Sampled verification of the recorded bounds under the state and input
  // norm weights; returns false if any random sample violates a bound.
  bool verify_bounds(std::mt19937_64& rng, int samples, double state_weight = 1.0,
                     double input_weight = 1.0) const;

 private:
  int state_dim_, input_dim_;
  EvalFn eval_;
  std::function<double(double, double)> lipschitz_;
  std::optional<LinearGrowthBound> linear_growth_;
  std::optional<BilinearBound> bilinear_;
};

// Sampled mild solution with maximal-existence metadata. If the state norm
// exceeded the blow-up cap the trajectory is truncated, escaped is set, and
// t_escape holds the first offending time.
struct Trajectory {
  double t0 = 0.0;
  std::vector<double> t;
  std::vector<Eigen::VectorXd> x;
  std::vector<double> norm;  // weighted state norms, cached
  bool escaped = false;
  std::optional<double> t_escape;

  double final_time() const { return t.empty() ? t0 : t.back(); }
  const Eigen::VectorXd& final_state() const { return x.back(); }
  // Linear interpolation of the norm history.
  double norm_at(double time) const;
  double max_norm() const;
};

struct SolveOptions {
  Stepper stepper = Stepper::RK4;
  double dt = 1e-3;
  double blowup_cap = 1e8;
  // Record every k-th step so that record_dt ~ k * dt; 0 records every step.
  double record_dt = 0.0;
  // Persistent relative per-step increment above this raises StepTooLargeError.
  double local_slope_cap = 1e3;
};

// Integrates x' = A(t)x + Psi(t, x, u(t)) on [t0, t_end] with steps anchored
// to the absolute dt lattice and forced boundaries at every breakpoint of u
// and A (the value at a breakpoint is the right limit). Realizes the
// boundedness-implies-continuation property through the blow-up cap.
// Stepper::Exact means exponential Euler here: the exact linear propagator per
// step with the nonlinearity explicit; it requires a closed-form generator.
Trajectory solve_mild(const TimeVaryingOperator& A, const NonlinearTerm& psi, double t0,
                      const Eigen::VectorXd& x0, const InputSignal& u, double t_end,
                      const SolveOptions& options);

// Cocycle residual |phi(t_end, t_mid, phi(t_mid, t0, x0, u), u) - phi(t_end, t0, x0, u)|
// computed on identical step grids. Throws EscapedError if any leg blows up.
double check_cocycle(const TimeVaryingOperator& A, const NonlinearTerm& psi, double t0,
                     const Eigen::VectorXd& x0, const InputSignal& u, double t_mid, double t_end,
                     const SolveOptions& options);

// True iff trajectories under u1 and u2 agree at time t within 1e-10; the
// caller arranges u1 == u2 on [t0, t).
bool check_causality(const TimeVaryingOperator& A, const NonlinearTerm& psi, double t0,
                     const Eigen::VectorXd& x0, const InputSignal& u1, const InputSignal& u2,
                     double t, const SolveOptions& options);

// Variation-of-constants evaluation W(t,t0)x0 + int W(t,s)B(s)u(s) ds by
// composite Simpson on the family's lattice; reference for solve_mild on
// linear systems.
Eigen::VectorXd variation_of_constants(const EvolutionFamily& W, const TimeVaryingOperator& B,
                                       double t0, const Eigen::VectorXd& x0, const InputSignal& u,
                                       double t, double quad_dt);

}  // namespace evolyap
