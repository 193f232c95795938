#include "evolyap/comparison.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "evolyap/signals.hpp"

namespace evolyap {

namespace {

constexpr double kProbeMax = 1e3;

// Probe grid used for membership validation of closed-form functions.
std::vector<double> probe_grid() {
  std::vector<double> g{0.0};
  for (double x = 1e-6; x <= kProbeMax; x *= 10.0) {
    g.push_back(x);
    g.push_back(3.0 * x);
  }
  return g;
}

bool finite(double v) { return std::isfinite(v); }

}  // namespace

ComparisonFunction ComparisonFunction::identity() {
  return linear(1.0, FunctionClass::Kinf);
}

ComparisonFunction ComparisonFunction::linear(double slope, FunctionClass cls) {
  if (!(slope > 0.0)) throw std::invalid_argument("linear comparison function needs slope > 0");
  ComparisonFunction f;
  f.cls_ = cls;
  f.f_ = [slope](double r) { return slope * r; };
  f.validate();
  return f;
}

ComparisonFunction ComparisonFunction::power(double exponent, double scale) {
  if (!(exponent > 0.0) || !(scale > 0.0))
    throw std::invalid_argument("power comparison function needs exponent, scale > 0");
  ComparisonFunction f;
  f.cls_ = FunctionClass::Kinf;
  f.f_ = [exponent, scale](double r) { return scale * std::pow(r, exponent); };
  return f;
}

ComparisonFunction ComparisonFunction::sqrt_gain() { return power(0.5); }

ComparisonFunction ComparisonFunction::custom(FunctionClass cls, std::function<double(double)> f) {
  if (cls == FunctionClass::KL) throw std::invalid_argument("use custom_kl for KL surfaces");
  ComparisonFunction g;
  g.cls_ = cls;
  g.f_ = std::move(f);
  g.validate();
  return g;
}

ComparisonFunction ComparisonFunction::piecewise_linear(FunctionClass cls, std::vector<double> xs,
                                                        std::vector<double> ys,
                                                        double extrapolation_slope) {
  if (xs.size() != ys.size() || xs.size() < 2)
    throw std::invalid_argument("piecewise_linear needs matching node vectors of size >= 2");
  if (!std::is_sorted(xs.begin(), xs.end()))
    throw std::invalid_argument("piecewise_linear nodes must be sorted");
  ComparisonFunction f;
  f.cls_ = cls;
  f.tabulated_ = true;
  f.xs_ = std::move(xs);
  f.ys_ = std::move(ys);
  f.extrap_slope_ = extrapolation_slope;
  f.validate();
  return f;
}

ComparisonFunction ComparisonFunction::exponential_kl(double c, double a) {
  if (!(c > 0.0) || !(a > 0.0)) throw std::invalid_argument("exponential_kl needs c, a > 0");
  ComparisonFunction f;
  f.cls_ = FunctionClass::KL;
  f.kl_parametric_ = true;
  f.kl_c_ = c;
  f.kl_a_ = a;
  f.kl_ = [c, a](double r, double t) { return c * r * std::exp(-a * t); };
  return f;
}

ComparisonFunction ComparisonFunction::custom_kl(std::function<double(double, double)> beta) {
  ComparisonFunction f;
  f.cls_ = FunctionClass::KL;
  f.kl_ = std::move(beta);
  f.validate();
  return f;
}

double ComparisonFunction::operator()(double r) const {
  if (is_kl()) throw std::invalid_argument("KL surface requires two arguments");
  if (!tabulated_) return f_(r);
  if (r <= xs_.front()) return ys_.front();
  if (r >= xs_.back()) return ys_.back() + extrap_slope_ * (r - xs_.back());
  auto it = std::upper_bound(xs_.begin(), xs_.end(), r);
  std::size_t i = static_cast<std::size_t>(it - xs_.begin());
  double w = (r - xs_[i - 1]) / (xs_[i] - xs_[i - 1]);
  return ys_[i - 1] + w * (ys_[i] - ys_[i - 1]);
}

double ComparisonFunction::operator()(double r, double t) const {
  if (!is_kl()) throw std::invalid_argument("two-argument call requires a KL surface");
  return kl_(r, t);
}

double ComparisonFunction::kl_scale() const {
  if (!kl_parametric_) throw std::invalid_argument("not an exponential KL surface");
  return kl_c_;
}

double ComparisonFunction::kl_rate() const {
  if (!kl_parametric_) throw std::invalid_argument("not an exponential KL surface");
  return kl_a_;
}

void ComparisonFunction::validate() const {
  const char* bad = nullptr;
  if (cls_ == FunctionClass::KL) {
    // Check the K property of r-sections and the L property of t-sections.
    for (double t : {0.0, 0.5, 2.0, 10.0}) {
      if (std::abs(kl_(0.0, t)) > 1e-12) bad = "KL surface must vanish at r = 0";
      double prev = 0.0;
      for (double r : {0.25, 0.5, 1.0, 4.0}) {
        double v = kl_(r, t);
        if (!finite(v) || v <= prev) bad = "KL surface not increasing in r";
        prev = v;
      }
    }
    for (double r : {0.5, 1.0, 4.0}) {
      double prev = std::numeric_limits<double>::infinity();
      for (double t : {0.0, 1.0, 5.0, 25.0}) {
        double v = kl_(r, t);
        if (!finite(v) || v >= prev) bad = "KL surface not decreasing in t";
        prev = v;
      }
      if (kl_(r, 700.0) > 1e-3 * kl_(r, 0.0)) bad = "KL surface does not decay in t";
    }
    if (bad) throw std::invalid_argument(bad);
    return;
  }

  const std::vector<double> grid = tabulated_ ? xs_ : probe_grid();
  auto eval = [this](double r) { return (*this)(r); };

  if (cls_ == FunctionClass::L) {
    double prev = std::numeric_limits<double>::infinity();
    for (double r : grid) {
      double v = eval(r);
      if (!finite(v) || v < 0.0) bad = "class-L function must be finite and nonnegative";
      if (v >= prev) bad = "class-L function must be strictly decreasing";
      prev = v;
    }
    double head = eval(grid.front());
    double tail = tabulated_ ? ys_.back() : eval(1e9);
    if (tail > 1e-2 * head + 1e-12) bad = "class-L function must decay towards zero";
    if (bad) throw std::invalid_argument(bad);
    return;
  }

  // Classes P, K, Kinf: zero at zero, positive elsewhere. Overflow to +inf on
  // the probe tail counts as unbounded growth, not as a defect.
  if (std::abs(eval(0.0)) > 1e-12) bad = "comparison function must vanish at zero";
  double prev = 0.0;
  bool overflowed = false;
  for (double r : grid) {
    if (r == 0.0) continue;
    double v = eval(r);
    if (std::isinf(v) && v > 0.0) {
      overflowed = true;
      break;
    }
    if (!finite(v) || v <= 0.0) bad = "comparison function must be positive for r > 0";
    if (cls_ != FunctionClass::P && v <= prev)
      bad = "class-K function must be strictly increasing";
    if (cls_ != FunctionClass::P) prev = v;
  }
  if (cls_ == FunctionClass::Kinf && !overflowed) {
    if (tabulated_) {
      if (!(extrap_slope_ > 0.0)) bad = "class-Kinf interpolant needs positive extrapolation slope";
    } else {
      const double tail = eval(1e12);
      if (!(std::isinf(tail) && tail > 0.0) && tail <= eval(kProbeMax))
        bad = "class-Kinf function must keep growing";
    }
  }
  if (bad) throw std::invalid_argument(bad);
}

double monotone_inverse(const ComparisonFunction& f, double y, double tol) {
  if (f.is_kl() || f.function_class() == FunctionClass::L ||
      f.function_class() == FunctionClass::P)
    throw std::invalid_argument("monotone_inverse needs a class-K or class-Kinf function");
  if (y < 0.0) throw std::invalid_argument("monotone_inverse target must be nonnegative");
  if (y == 0.0) return 0.0;

  if (f.is_piecewise_linear()) {
    // Exact interpolation on the tabulated graph.
    auto xs = f.nodes();
    std::vector<double> ys(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) ys[i] = f(xs[i]);
    if (y > ys.back()) {
      if (f.function_class() != FunctionClass::Kinf)
        throw OutOfRangeError("monotone_inverse: target above the range of a bounded function");
      double slope = (f(xs.back() + 1.0) - ys.back());
      return xs.back() + (y - ys.back()) / slope;
    }
    auto it = std::lower_bound(ys.begin(), ys.end(), y);
    std::size_t i = static_cast<std::size_t>(it - ys.begin());
    if (ys[i] == y) return xs[i];
    double w = (y - ys[i - 1]) / (ys[i] - ys[i - 1]);
    return xs[i - 1] + w * (xs[i] - xs[i - 1]);
  }

  // Bracket then bisect.
  double hi = 1.0;
  const double hi_cap = (f.function_class() == FunctionClass::Kinf) ? 1e300 : 1e12;
  while (f(hi) < y) {
    hi *= 2.0;
    if (hi > hi_cap)
      throw OutOfRangeError("monotone_inverse: target above the range of a bounded function");
  }
  double lo = 0.0;
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    double v = f(mid);
    if (std::abs(v - y) <= tol * (1.0 + y)) return mid;
    (v < y ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

double IntegratedBound::at(double time) const {
  if (t.empty()) throw std::invalid_argument("empty integrated bound");
  if (time <= t.front()) return value.front();
  if (time >= t.back()) return value.back();
  auto it = std::upper_bound(t.begin(), t.end(), time);
  std::size_t i = static_cast<std::size_t>(it - t.begin());
  double w = (time - t[i - 1]) / (t[i] - t[i - 1]);
  return value[i - 1] + w * (value[i] - value[i - 1]);
}

IntegratedBound comparison_integrate(const ComparisonFunction& theta, double omega0,
                                     const InputSignal& eta, double t0, double t1, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("comparison_integrate needs dt > 0");
  if (t1 < t0) throw std::invalid_argument("comparison_integrate needs t1 >= t0");
  if (eta.dim() != 1) throw std::invalid_argument("comparison_integrate needs a scalar signal");

  // Step boundaries: the dt lattice anchored at t0, plus eta's breakpoints.
  std::vector<double> bounds{t0};
  for (double b : eta.breakpoints_in(t0, t1)) bounds.push_back(b);
  const long nsteps = static_cast<long>(std::ceil((t1 - t0) / dt - 1e-12));
  for (long k = 1; k < nsteps; ++k) bounds.push_back(t0 + static_cast<double>(k) * dt);
  bounds.push_back(t1);
  std::sort(bounds.begin(), bounds.end());
  bounds.erase(std::unique(bounds.begin(), bounds.end(),
                           [](double a, double b) { return std::abs(a - b) < 1e-14; }),
               bounds.end());

  auto theta_clamped = [&theta](double s) { return theta(std::max(s, 0.0)); };

  IntegratedBound out;
  out.t.reserve(bounds.size());
  out.value.reserve(bounds.size());
  double omega = std::max(omega0, 0.0);
  out.t.push_back(t0);
  out.value.push_back(omega);
  for (std::size_t i = 0; i + 1 < bounds.size(); ++i) {
    const double a = bounds[i], b = bounds[i + 1], h = b - a;
    // eta is evaluated inside the piece [a, b); at b take the left limit.
    auto eta_at = [&](double s) {
      return eta.value(s, s >= b ? Side::Left : Side::Right)(0);
    };
    auto rhs = [&](double s, double w) { return -theta_clamped(w) + eta_at(s); };
    const double k1 = rhs(a, omega);
    const double k2 = rhs(a + 0.5 * h, omega + 0.5 * h * k1);
    const double k3 = rhs(a + 0.5 * h, omega + 0.5 * h * k2);
    const double k4 = rhs(b, omega + h * k3);
    omega += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!std::isfinite(omega))
      throw NonFiniteError("comparison_integrate: state overflowed at t = " + std::to_string(b));
    omega = std::max(omega, 0.0);
    out.t.push_back(b);
    out.value.push_back(omega);
  }
  return out;
}

ComparisonFunction fit_kl_envelope(std::span<const ZeroInputRun> runs, const KLFitOptions& opt) {
  // Pool log-ratio samples y = ln(|phi(t0+tau)| / |x0|).
  struct Point {
    double t0, tau, y;
  };
  std::vector<Point> pts;
  std::vector<double> levels;
  for (const auto& run : runs) {
    if (run.tau.size() != run.norm.size())
      throw std::invalid_argument("fit_kl_envelope: mismatched sample vectors");
    if (run.x0_norm <= 0.0) continue;
    levels.push_back(run.x0_norm);
    for (std::size_t i = 0; i < run.tau.size(); ++i) {
      if (run.norm[i] <= 0.0) continue;  // zero states are majorized by anything
      pts.push_back({run.t0, run.tau[i], std::log(run.norm[i] / run.x0_norm)});
    }
  }
  if (pts.empty()) {
    // Only zero trajectories: any decaying envelope majorizes them.
    return ComparisonFunction::exponential_kl(1.0, 1.0);
  }
  std::sort(levels.begin(), levels.end());
  levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
  if (levels.size() < 2)
    throw std::invalid_argument("fit_kl_envelope needs at least 2 distinct initial norm levels");

  // Least squares y ~ b - a * tau on the pooled samples.
  double n = static_cast<double>(pts.size());
  double st = 0, sy = 0, stt = 0, sty = 0;
  for (const auto& p : pts) {
    st += p.tau;
    sy += p.y;
    stt += p.tau * p.tau;
    sty += p.tau * p.y;
  }
  const double denom = n * stt - st * st;
  if (std::abs(denom) < 1e-14 * std::max(1.0, stt))
    throw NotUniformlyStableError("fit_kl_envelope: degenerate elapsed-time samples");
  const double slope = (n * sty - st * sy) / denom;
  const double a = -slope;
  if (!(a > 0.0))
    throw NotUniformlyStableError("fit_kl_envelope: fitted decay rate is nonpositive");

  // Lift the constant until the envelope majorizes every sample, and check
  // that the required constant saturates across start times; a constant that
  // keeps growing with t0 means no uniform envelope exists.
  auto required_c = [&](double t0_cut) {
    double lc = -std::numeric_limits<double>::infinity();
    for (const auto& p : pts)
      if (p.t0 <= t0_cut) lc = std::max(lc, p.y + a * p.tau);
    return lc;
  };
  double t0_min = pts.front().t0, t0_max = pts.front().t0;
  for (const auto& p : pts) {
    t0_min = std::min(t0_min, p.t0);
    t0_max = std::max(t0_max, p.t0);
  }
  const double log_c_all = required_c(t0_max);
  if (t0_max > t0_min) {
    const double log_c_half = required_c(0.5 * (t0_min + t0_max));
    if (std::exp(log_c_all) > std::exp(log_c_half) * (1.0 + opt.saturation_tol))
      throw NotUniformlyStableError(
          "fit_kl_envelope: required constant grows with the start time");
  }
  const double c = std::max(1.0, std::exp(log_c_all) * (1.0 + opt.slack));
  return ComparisonFunction::exponential_kl(c, a);
}

}  // namespace evolyap
