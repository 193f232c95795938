#pragma once

#include <functional>
#include <span>
#include <vector>

#include "evolyap/errors.hpp"

namespace evolyap {

class InputSignal;

// Classes of comparison functions used throughout the stability estimates:
//   P    - continuous, zero at zero, positive elsewhere (positive definite)
//   K    - class P and strictly increasing
//   Kinf - class K and unbounded
//   L    - strictly decreasing to zero
//   KL   - class K in the first argument, class L in the second
enum class FunctionClass { P, K, Kinf, L, KL };

// A scalar comparison function with declared class membership.
//
// Two representations are supported: a closed-form evaluator, and a monotone
// piecewise-linear interpolant over a node grid (with a positive extrapolation
// slope beyond the last node for class Kinf). Class membership is checked on a
// probe grid at construction; violations raise std::invalid_argument.
//
// KL surfaces are either the parametric family beta(r,t) = c * r * exp(-a*t)
// or a generic closed-form fallback. Instances are immutable.
class ComparisonFunction {
 public:
  // Closed-form scalar functions.
  static ComparisonFunction identity();
  static ComparisonFunction linear(double slope, FunctionClass cls = FunctionClass::Kinf);
  static ComparisonFunction power(double exponent, double scale = 1.0);  // scale * r^exponent
  static ComparisonFunction sqrt_gain();                                 // r -> sqrt(r)
  static ComparisonFunction custom(FunctionClass cls, std::function<double(double)> f);

  // Monotone piecewise-linear interpolant through (xs, ys); xs[0] must be 0.
  // For Kinf the extrapolation slope beyond the last node must be positive.
  static ComparisonFunction piecewise_linear(FunctionClass cls, std::vector<double> xs,
                                             std::vector<double> ys,
                                             double extrapolation_slope = 0.0);

  // KL surfaces.
  static ComparisonFunction exponential_kl(double c, double a);  // c * r * exp(-a*t)
  static ComparisonFunction custom_kl(std::function<double(double, double)> beta);

  FunctionClass function_class() const { return cls_; }
  bool is_kl() const { return cls_ == FunctionClass::KL; }
  bool is_piecewise_linear() const { return tabulated_; }

  double operator()(double r) const;            // scalar classes
  double operator()(double r, double t) const;  // KL only

  // Parameters of the exponential KL family; throws if not of that form.
  double kl_scale() const;
  double kl_rate() const;

  // Node grid of a piecewise-linear interpolant (empty otherwise).
  std::span<const double> nodes() const { return xs_; }

 private:
  ComparisonFunction() = default;
  void validate() const;

  FunctionClass cls_ = FunctionClass::K;
  std::function<double(double)> f_;
  std::function<double(double, double)> kl_;
  std::vector<double> xs_, ys_;
  double extrap_slope_ = 0.0;
  bool tabulated_ = false;
  bool kl_parametric_ = false;
  double kl_c_ = 0.0, kl_a_ = 0.0;
};

// Inverse of a strictly increasing comparison function. Exact on the nodes of
// piecewise-linear interpolants; elsewhere |f(x) - y| <= tol * (1 + y).
// Throws OutOfRangeError for bounded class-K functions when y exceeds sup f.
double monotone_inverse(const ComparisonFunction& f, double y, double tol = 1e-12);

// Sampled upper solution of the scalar comparison ODE.
struct IntegratedBound {
  std::vector<double> t;
  std::vector<double> value;

  // Linear interpolation between samples; clamped at the ends.
  double at(double time) const;
};

// Integrates omega' = -theta(omega) + eta(t) on [t0, t1] with fixed-step RK4
// and nonnegativity clipping. eta must be a scalar, nonnegative signal. With
// eta == 0 the output is nonincreasing. Throws NonFiniteError on overflow.
IntegratedBound comparison_integrate(const ComparisonFunction& theta, double omega0,
                                     const InputSignal& eta, double t0, double t1, double dt);

// One zero-input trajectory norm history used for envelope fitting. tau holds
// elapsed times since the start of the run.
struct ZeroInputRun {
  double t0 = 0.0;
  double x0_norm = 0.0;
  std::vector<double> tau;
  std::vector<double> norm;
};

struct KLFitOptions {
  double slack = 1e-9;           // majorization slack on the log scale
  double saturation_tol = 0.5;   // admissible growth of the constant across start times
};

// Fits beta(r,t) = c * r * exp(-a*t), c >= 1, a > 0, that majorizes every
// sample. The rate comes from a least-squares fit on the log scale and the
// constant is lifted to dominate the data. Throws NotUniformlyStableError if
// the fitted rate is nonpositive, or if the required constant keeps growing
// with the start time t0 (no start-time-uniform envelope exists).
ComparisonFunction fit_kl_envelope(std::span<const ZeroInputRun> runs,
                                   const KLFitOptions& options = {});

// A fitted trajectory envelope together with its validation residual
// max(lhs - rhs) over the validation set.
struct EnvelopeFit {
  ComparisonFunction beta;   // KL
  ComparisonFunction gamma;  // K
  double residual = 0.0;
};

}  // namespace evolyap
