#pragma once

#include <Eigen/Core>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <vector>

#include "evolyap/errors.hpp"
#include "evolyap/signals.hpp"

namespace evolyap {

// Time-varying generator family {A(t)} of a linear system x' = A(t) x on a
// finite-dimensional state space. The structural form drives the exact
// propagation paths:
//   Constant           A(t) = M
//   ConstantPlusScalar A(t) = M + f(t) I with a closed-form antiderivative of f
//   PiecewiseScalar    dim 1, piecewise-constant value with an exact integral
//   General            arbitrary matrix-valued callable
// norm_weight is the uniform weight of the discrete state-space norm
// |x|_X = sqrt(norm_weight) * |x|_2 (dz for PDE grids, 1 otherwise).
class TimeVaryingOperator {
 public:
  enum class Form { Constant, ConstantPlusScalar, PiecewiseScalar, General };

  static TimeVaryingOperator constant(Eigen::MatrixXd A, double norm_weight = 1.0);
  static TimeVaryingOperator scalar_constant(double a);
  static TimeVaryingOperator constant_plus_scalar(Eigen::MatrixXd M,
                                                  std::function<double(double)> f,
                                                  std::function<double(double)> antiderivative,
                                                  std::optional<double> bound_sup,
                                                  double norm_weight = 1.0);
  // Scalar piecewise-constant generator given by closed-form piece data.
  // `integral` must return the exact value of the integral of A over [s, t].
  static TimeVaryingOperator piecewise_scalar(
      std::function<double(double)> value, std::function<double(double, double)> integral,
      std::function<std::vector<double>(double, double)> breakpoints_in,
      std::optional<double> bound_sup);
  // Scalar piecewise-constant generator from a finite table: values[i] on
  // [times[i], times[i+1]), last value extended to infinity.
  static TimeVaryingOperator piecewise_scalar_table(std::vector<double> times,
                                                    std::vector<double> values);
  static TimeVaryingOperator general(int dim, std::function<Eigen::MatrixXd(double)> eval,
                                     std::optional<double> bound_sup,
                                     std::vector<double> breakpoints = {},
                                     double norm_weight = 1.0);

  int dim() const { return dim_; }
  Form form() const { return form_; }
  double norm_weight() const { return norm_weight_; }
  std::optional<double> bound_sup() const { return bound_sup_; }

  Eigen::MatrixXd operator()(double t) const { return eval(t, Side::Right); }
  Eigen::MatrixXd eval(double t, Side side) const;

  // Discontinuity times of t -> A(t) in the open interval (t0, t1).
  std::vector<double> breakpoints_in(double t0, double t1) const;

  // Structural accessors (throw unless the form matches).
  const Eigen::MatrixXd& constant_part() const;
  double scalar_shift(double t) const;                      // f(t)
  double scalar_shift_integral(double s, double t) const;   // int_s^t f
  double scalar_value(double t, Side side = Side::Right) const;
  double scalar_integral(double s, double t) const;         // exact int_s^t A

 private:
  TimeVaryingOperator() = default;

  Form form_ = Form::General;
  int dim_ = 0;
  double norm_weight_ = 1.0;
  std::optional<double> bound_sup_;
  Eigen::MatrixXd M_;
  std::function<double(double)> f_, F_;
  std::function<double(double)> scalar_value_;
  std::function<double(double, double)> scalar_integral_;
  std::function<std::vector<double>(double, double)> breakpoints_fn_;
  std::function<Eigen::MatrixXd(double)> eval_;
  std::vector<double> breakpoints_;
};

// Time steppers for propagator construction. Exact requires a closed-form
// generator (Constant, ConstantPlusScalar, or PiecewiseScalar) and evaluates
// matrix exponentials; ImplicitEuler treats the full generator implicitly and
// is the choice for stiff PDE discretizations.
enum class Stepper { Exact, RK4, ImplicitEuler };

struct UBRSResult {
  bool ubrs = false;
  double K = 0.0;          // one-step window supremum of the propagator norm
  bool saturated = false;  // K stopped growing across start times
  bool power_bound_ok = false;
};

struct ClassifyOptions {
  std::vector<double> t0_grid;       // start times; filled with 0..10 step 0.5 if empty
  double horizon = 12.0;             // largest elapsed time in the norm table
  double T_step = 0.25;              // elapsed-time resolution of the norm table
  std::vector<double> eps_levels = {0.5, 0.1, 0.01};
  double stability_cap = 1e6;        // N above this is never uniformly stable
  double saturation_tol = 0.5;       // admissible growth of sups across start times
  double ubrs_sample_dt = 0.05;      // in-window sampling step for the UBRS constant
  double ubrs_cap = 1e6;
  bool fit_lower_envelope = false;
  double envelope_slack = 1e-9;
};

// Classification outcome with fitted constants and the sampled norm tables.
struct StabilityReport {
  bool uniformly_stable = false;
  double N = 0.0;  // sup of sampled propagator norms

  struct AttractTime {
    double eps = 0.0;
    double T = 0.0;
    bool found = false;         // located inside the sampled horizon
    bool extrapolated = false;  // implied by the exponential majorant only
  };
  bool uniformly_attractive = false;
  std::vector<AttractTime> attract_times;

  bool ubrs = false;
  double K = 0.0;
  bool ubrs_power_bound_ok = false;

  bool uniformly_exponentially_stable = false;
  double k = 0.0, w = 0.0;  // |W(t,t0)| <= k exp(-w (t-t0)) majorant

  std::optional<std::pair<double, double>> lower_envelope;  // (M, lambda) minorant

  std::vector<double> T_grid;
  std::vector<double> sup_norm_table;     // T -> sup_t0 |W(t0+T, t0)|
  std::vector<double> min_sv_table;       // T -> inf_t0 sigma_min(W(t0+T, t0))
};

// Two-parameter evolution family W(t,s) built by stepping x' = A(t) x.
//
// Unit-interval propagators on a coarse tick grid are cached and composed via
// the cocycle identity; steps are anchored to the absolute dt lattice so that
// grid-aligned splits reproduce identical step sequences. Cache writes are
// mutex-guarded; queries after a build_cache() call are read-only.
class EvolutionFamily {
 public:
  EvolutionFamily(TimeVaryingOperator generator, Stepper stepper, double dt,
                  double cache_step = 1.0);

  int dim() const { return generator_.dim(); }
  double dt() const { return dt_; }
  Stepper stepper() const { return stepper_; }
  const TimeVaryingOperator& generator() const { return generator_; }
  double norm_weight() const { return generator_.norm_weight(); }
  double state_norm(const Eigen::VectorXd& x) const {
    return std::sqrt(generator_.norm_weight()) * x.norm();
  }

  // W(t,s)x for t >= s >= 0. Overflow is reported through non-finite entries
  // in the result, not by throwing.
  Eigen::VectorXd propagate(double s, double t, const Eigen::VectorXd& x) const;

  // Full propagator matrix W(t,s).
  Eigen::MatrixXd matrix(double s, double t) const;

  // Spectral norm and smallest singular value of W(t,s).
  double operator_norm(double s, double t) const;
  double min_singular_value(double s, double t) const;

  // One-step-window norm supremum K over the start-time grid, with the
  // saturation check across start times and the K^ceil(T) window bound.
  UBRSResult check_ubrs(std::span<const double> t0_grid, double sample_dt, double cap,
                        double saturation_tol = 0.5) const;

  // Full stability classification over sampled grids. Throws
  // InconclusiveHorizonError when the majorant fit is nonnegative while the
  // norm table still decreases at the end of the horizon.
  StabilityReport classify(const ClassifyOptions& options = {}) const;

  // Precompute cached tick propagators up to t_max.
  void build_cache(double t_max) const;

 private:
  Eigen::MatrixXd step_matrix(double s, double t) const;
  void step_vector(double s, double t, Eigen::VectorXd& x) const;
  Eigen::MatrixXd exact_piece(double a, double b) const;
  const Eigen::MatrixXd& cached_unit(long index) const;
  const Eigen::MatrixXd& cached_expm(double delta) const;
  std::vector<double> step_bounds(double s, double t) const;

  TimeVaryingOperator generator_;
  Stepper stepper_;
  double dt_;
  double cache_step_;

  // Symmetric constant generators propagate through their eigendecomposition.
  bool symmetric_constant_ = false;
  Eigen::MatrixXd sym_basis_;
  Eigen::VectorXd sym_eigenvalues_;

  mutable std::mutex cache_mutex_;
  mutable std::map<long, Eigen::MatrixXd> unit_cache_;
  mutable std::map<long long, Eigen::MatrixXd> expm_cache_;
  mutable std::map<long long, std::pair<double, double>> sv_cache_;  // extreme singular values
};

// Spectral norm of a dense matrix (largest singular value).
double spectral_norm(const Eigen::MatrixXd& m);
double smallest_singular_value(const Eigen::MatrixXd& m);

// Scalar generator that alternates half-unit pieces of strong decay
// -2 ln(2(k+1)^2) and logarithmic growth 2 ln(k+1) on [k, k+1); its evolution
// family is uniformly attractive but has one-step norms growing like k+1, so
// it is neither uniformly stable nor UBRS.
TimeVaryingOperator make_alternating_log_scalar();

}  // namespace evolyap
