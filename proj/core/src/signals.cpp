#include "evolyap/signals.hpp"

#include <algorithm>
#include <cmath>

namespace evolyap {

namespace {

constexpr double kTailWindow = 100.0;  // sampling window on the final piece
constexpr int kSupSamples = 2048;

double simpson(const std::function<double(double)>& f, double a, double m, double b, double fa,
               double fm, double fb) {
  return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double fa,
                        double fm, double fb, double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = simpson(f, a, lm, m, fa, flm, fm);
  const double right = simpson(f, m, rm, b, fm, frm, fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  return adaptive_simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         adaptive_simpson(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

double integrate(const std::function<double(double)>& f, double a, double b, double tol) {
  if (b <= a) return 0.0;
  const double m = 0.5 * (a + b);
  const double fa = f(a), fm = f(m), fb = f(b);
  return adaptive_simpson(f, a, b, fa, fm, fb, simpson(f, a, m, b, fa, fm, fb), tol, 48);
}

}  // namespace

InputSignal::InputSignal(int dim, std::vector<Piece> pieces, double norm_weight)
    : dim_(dim), norm_weight_(norm_weight), pieces_(std::move(pieces)) {
  if (dim_ < 1) throw std::invalid_argument("InputSignal: dim must be positive");
  if (!(norm_weight_ > 0.0)) throw std::invalid_argument("InputSignal: norm_weight must be > 0");
  if (pieces_.empty()) throw std::invalid_argument("InputSignal: needs at least one piece");
  if (pieces_.front().start != 0.0)
    throw std::invalid_argument("InputSignal: first piece must start at t = 0");
  for (std::size_t i = 1; i < pieces_.size(); ++i)
    if (!(pieces_[i].start > pieces_[i - 1].start))
      throw std::invalid_argument("InputSignal: piece starts must be strictly increasing");
  finalize();
}

void InputSignal::finalize() {
  breakpoints_.clear();
  for (std::size_t i = 1; i < pieces_.size(); ++i) breakpoints_.push_back(pieces_[i].start);

  double sup = 0.0;
  for (std::size_t i = 0; i < pieces_.size(); ++i) {
    auto& p = pieces_[i];
    if (p.value(p.start).size() != dim_)
      throw std::invalid_argument("InputSignal: piece value dimension mismatch");
    if (p.exact_sup) {
      sup = std::max(sup, *p.exact_sup);
      continue;
    }
    const double end =
        (i + 1 < pieces_.size()) ? pieces_[i + 1].start : p.start + kTailWindow;
    // Sample on a lattice anchored in absolute time so that shifted signals
    // sample a subset of the original points.
    const double h = (end - p.start) / kSupSamples;
    const double anchor = p.sample_anchor;
    long j0 = static_cast<long>(std::ceil((p.start - anchor) / h - 1e-12));
    for (long j = j0;; ++j) {
      const double t = anchor + static_cast<double>(j) * h;
      if (t > end + 1e-12) break;
      sup = std::max(sup, std::sqrt(norm_weight_) * p.value(std::max(t, p.start)).norm());
    }
  }
  sup_norm_ = sup;
}

std::size_t InputSignal::piece_index(double t, Side side) const {
  // Last piece whose start is <= t; for Side::Left a start itself belongs to
  // the preceding piece.
  std::size_t lo = 0, hi = pieces_.size();
  while (hi - lo > 1) {
    std::size_t mid = (lo + hi) / 2;
    const bool in = (side == Side::Right) ? (pieces_[mid].start <= t) : (pieces_[mid].start < t);
    (in ? lo : hi) = mid;
  }
  return lo;
}

Eigen::VectorXd InputSignal::value(double t, Side side) const {
  t = std::max(t, 0.0);
  return pieces_[piece_index(t, side)].value(t);
}

double InputSignal::value_norm(double t, Side side) const {
  return std::sqrt(norm_weight_) * value(t, side).norm();
}

std::vector<double> InputSignal::breakpoints_in(double t0, double t1) const {
  std::vector<double> out;
  for (double b : breakpoints_)
    if (b > t0 && b < t1) out.push_back(b);
  return out;
}

InputSignal InputSignal::zero(int dim) {
  return constant(Eigen::VectorXd::Zero(dim), 1.0);
}

InputSignal InputSignal::constant(double v) {
  return constant(Eigen::VectorXd::Constant(1, v), 1.0);
}

InputSignal InputSignal::constant(Eigen::VectorXd v, double norm_weight) {
  const double sup = std::sqrt(norm_weight) * v.norm();
  Piece p{0.0, [v = std::move(v)](double) { return v; }, sup, 0.0};
  const int dim = static_cast<int>(p.value(0.0).size());
  return InputSignal(dim, {std::move(p)}, norm_weight);
}

InputSignal InputSignal::step(double t_jump, double before, double after) {
  auto piece = [](double start, double v) {
    return Piece{start, [v](double) { return Eigen::VectorXd::Constant(1, v); }, std::abs(v),
                 start};
  };
  if (t_jump <= 0.0) return InputSignal(1, {piece(0.0, after)});
  return InputSignal(1, {piece(0.0, before), piece(t_jump, after)});
}

InputSignal InputSignal::sine(double amplitude, double omega, double phase) {
  Piece p{0.0,
          [=](double t) { return Eigen::VectorXd::Constant(1, amplitude * std::sin(omega * t + phase)); },
          std::abs(amplitude), 0.0};
  return InputSignal(1, {std::move(p)});
}

InputSignal InputSignal::ramp(double slope, double cap) {
  if (slope < 0.0 || cap < 0.0) throw std::invalid_argument("ramp needs slope, cap >= 0");
  Piece p{0.0,
          [=](double t) { return Eigen::VectorXd::Constant(1, std::min(slope * t, cap)); },
          slope > 0.0 ? cap : 0.0, 0.0};
  return InputSignal(1, {std::move(p)});
}

InputSignal InputSignal::sample_grid(std::vector<double> times, std::vector<Eigen::VectorXd> values,
                                     double norm_weight) {
  if (times.size() != values.size() || times.empty())
    throw std::invalid_argument("sample_grid needs matching nonempty vectors");
  std::vector<Piece> pieces;
  pieces.reserve(times.size());
  for (std::size_t i = 0; i < times.size(); ++i) {
    Eigen::VectorXd v = values[i];
    const double sup = std::sqrt(norm_weight) * v.norm();
    pieces.push_back({times[i], [v = std::move(v)](double) { return v; }, sup, times[i]});
  }
  const int dim = static_cast<int>(values.front().size());
  return InputSignal(dim, std::move(pieces), norm_weight);
}

InputSignal InputSignal::scalar(std::function<double(double)> f) {
  Piece p{0.0,
          [f = std::move(f)](double t) { return Eigen::VectorXd::Constant(1, f(t)); },
          std::nullopt, 0.0};
  return InputSignal(1, {std::move(p)});
}

InputSignal InputSignal::custom(int dim, std::function<Eigen::VectorXd(double)> f,
                                double norm_weight, std::optional<double> exact_sup) {
  Piece p{0.0, std::move(f), exact_sup, 0.0};
  return InputSignal(dim, {std::move(p)}, norm_weight);
}

InputSignal shift(const InputSignal& u, double tau) {
  if (tau < 0.0) throw std::invalid_argument("shift needs tau >= 0");
  if (tau == 0.0) return u;
  std::vector<InputSignal::Piece> pieces;
  for (std::size_t i = 0; i < u.pieces_.size(); ++i) {
    const auto& p = u.pieces_[i];
    const bool last = (i + 1 == u.pieces_.size());
    if (!last && u.pieces_[i + 1].start <= tau) continue;  // piece entirely before the shift
    InputSignal::Piece q;
    q.start = std::max(0.0, p.start - tau);
    q.value = [inner = p.value, tau](double t) { return inner(t + tau); };
    q.exact_sup = p.exact_sup;  // sup over a tail never exceeds the piece sup
    q.sample_anchor = p.sample_anchor - tau;
    pieces.push_back(std::move(q));
  }
  return InputSignal(u.dim_, std::move(pieces), u.norm_weight_);
}

double energy(const InputSignal& u, const ComparisonFunction& mu, double t0, double t1) {
  if (t1 < t0) throw std::invalid_argument("energy needs t1 >= t0");
  if (t1 == t0) return 0.0;
  std::vector<double> bounds{t0};
  for (double b : u.breakpoints_in(t0, t1)) bounds.push_back(b);
  bounds.push_back(t1);
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < bounds.size(); ++i) {
    const double a = bounds[i], b = bounds[i + 1];
    auto integrand = [&](double s) {
      return mu(u.value_norm(s, s >= b ? Side::Left : Side::Right));
    };
    total += integrate(integrand, a, b, 1e-12);
  }
  return total;
}

}  // namespace evolyap
