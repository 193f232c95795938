#pragma once

#include <Eigen/Core>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <vector>

#include "evolyap/comparison.hpp"
#include "evolyap/errors.hpp"

namespace evolyap {

// Which one-sided limit to take at a discontinuity time.
enum class Side { Right, Left };

// Piecewise-continuous input u: R+ -> U with finitely many discontinuities.
// Signals are right-continuous at every breakpoint and total on R+ (the last
// piece extends to infinity). U is a finite-dimensional vector space; the
// value norm is sqrt(norm_weight) * |.|_2, so grid-valued inputs with
// norm_weight = dz carry the discrete L2(0,l) norm.
//
// Immutable after construction; evaluation is pure.
class InputSignal {
 public:
  struct Piece {
    double start = 0.0;
    std::function<Eigen::VectorXd(double)> value;
    // Supremum of the value norm over the piece when known in closed form;
    // keeps the shift axiom exact for the standard piece kinds.
    std::optional<double> exact_sup;
    // Sampling anchor in absolute time for sup estimation of generic pieces.
    double sample_anchor = 0.0;
  };

  InputSignal(int dim, std::vector<Piece> pieces, double norm_weight = 1.0);

  static InputSignal zero(int dim = 1);
  static InputSignal constant(double v);
  static InputSignal constant(Eigen::VectorXd v, double norm_weight = 1.0);
  // Scalar step: `before` on [0, t_jump), `after` from t_jump on.
  static InputSignal step(double t_jump, double before, double after);
  // amplitude * sin(omega t + phase), scalar.
  static InputSignal sine(double amplitude, double omega, double phase = 0.0);
  // Saturating ramp min(slope * t, cap), scalar; slope, cap >= 0.
  static InputSignal ramp(double slope, double cap);
  // Piecewise-constant from samples: value[i] on [times[i], times[i+1]).
  static InputSignal sample_grid(std::vector<double> times, std::vector<Eigen::VectorXd> values,
                                 double norm_weight = 1.0);
  // Single smooth scalar piece from a callable (sup estimated by sampling).
  static InputSignal scalar(std::function<double(double)> f);
  // Single smooth vector-valued piece; pass exact_sup when the supremum of
  // the value norm is known in closed form.
  static InputSignal custom(int dim, std::function<Eigen::VectorXd(double)> f,
                            double norm_weight = 1.0,
                            std::optional<double> exact_sup = std::nullopt);

  int dim() const { return dim_; }
  double norm_weight() const { return norm_weight_; }

  Eigen::VectorXd operator()(double t) const { return value(t, Side::Right); }
  Eigen::VectorXd value(double t, Side side) const;
  double value_norm(double t, Side side = Side::Right) const;

  // Cached sup over samples of the value norm.
  double sup_norm() const { return sup_norm_; }

  // Discontinuity times (piece starts after the first).
  const std::vector<double>& breakpoints() const { return breakpoints_; }
  std::vector<double> breakpoints_in(double t0, double t1) const;

 private:
  friend InputSignal shift(const InputSignal& u, double tau);

  std::size_t piece_index(double t, Side side) const;
  void finalize();

  int dim_ = 1;
  double norm_weight_ = 1.0;
  std::vector<Piece> pieces_;
  std::vector<double> breakpoints_;
  double sup_norm_ = 0.0;
};

// Time shift (shift(u, tau))(t) = u(t + tau); tau >= 0. Breakpoints are
// translated and truncated at zero and the cached sup norm never exceeds the
// original one.
InputSignal shift(const InputSignal& u, double tau);

// Input energy integral of mu(|u(s)|_U) ds over [t0, t1], computed by adaptive
// Simpson quadrature on each continuity piece. Additive over adjacent
// intervals to 1e-10.
double energy(const InputSignal& u, const ComparisonFunction& mu, double t0, double t1);

}  // namespace evolyap
