#include "commands.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <random>
#include <sstream>

#include "csv.hpp"
#include "evolyap/comparison.hpp"
#include "evolyap/evolution.hpp"
#include "evolyap/lyapunov.hpp"
#include "evolyap/pde.hpp"
#include "evolyap/semilinear.hpp"
#include "evolyap/signals.hpp"
#include "presets.hpp"
#include "svg_plot.hpp"

namespace evolyap::tools {

namespace fs = std::filesystem;

namespace {

constexpr const char* kRngName = "mt19937_64";

struct BuiltSystem {
  TimeVaryingOperator A = TimeVaryingOperator::scalar_constant(-1.0);
  NonlinearTerm psi = NonlinearTerm::zero(1);
  std::shared_ptr<const TimeVaryingOperator> B;  // input operator when the system is linear
  int dim = 1;
  double state_weight = 1.0;
  Stepper family_stepper = Stepper::Exact;
  Stepper sim_stepper = Stepper::Exact;
  std::optional<KSConfig> ks;
  std::optional<HeatConfig> heat;
};

Stepper parse_stepper(const std::string& name, Stepper fallback) {
  if (name.empty()) return fallback;
  if (name == "exact") return Stepper::Exact;
  if (name == "rk4") return Stepper::RK4;
  return Stepper::ImplicitEuler;
}

BuiltSystem build_system(const ExperimentConfig& cfg) {
  const auto& s = cfg.system;
  BuiltSystem sys;
  if (s.kind == "matrix-constant") {
    sys.dim = static_cast<int>(s.A0.rows());
    sys.A = TimeVaryingOperator::constant(s.A0);
    sys.B = std::make_shared<const TimeVaryingOperator>(
        TimeVaryingOperator::constant(Eigen::MatrixXd::Identity(sys.dim, sys.dim)));
    sys.psi = NonlinearTerm::input_map(sys.B);
    sys.family_stepper = Stepper::Exact;
    sys.sim_stepper = Stepper::Exact;
  } else if (s.kind == "matrix-timevarying" || s.kind == "matrix-timevarying-expr") {
    sys.dim = static_cast<int>(s.A0.rows());
    Eigen::MatrixXd A1 = s.A1.size() ? s.A1 : Eigen::MatrixXd::Zero(sys.dim, sys.dim);
    Eigen::MatrixXd A2 = s.A2.size() ? s.A2 : Eigen::MatrixXd::Zero(sys.dim, sys.dim);
    const double bound = spectral_norm(s.A0) + spectral_norm(A1) + spectral_norm(A2);
    const double w1 = s.w1, w2 = s.w2;
    Eigen::MatrixXd A0 = s.A0;
    sys.A = TimeVaryingOperator::general(
        sys.dim,
        [A0, A1, A2, w1, w2](double t) -> Eigen::MatrixXd {
          return A0 + std::sin(w1 * t) * A1 + std::cos(w2 * t) * A2;
        },
        bound);
    sys.B = std::make_shared<const TimeVaryingOperator>(
        TimeVaryingOperator::constant(Eigen::MatrixXd::Identity(sys.dim, sys.dim)));
    sys.psi = NonlinearTerm::input_map(sys.B);
    sys.family_stepper = Stepper::RK4;
    sys.sim_stepper = Stepper::RK4;
  } else if (s.kind == "piecewise-scalar") {
    sys.dim = 1;
    sys.A = (s.preset == "alternating-log" || (s.preset.empty() && s.times.empty()))
                ? make_alternating_log_scalar()
                : TimeVaryingOperator::piecewise_scalar_table(s.times, s.values);
    if (!s.preset.empty() && s.preset != "alternating-log")
      throw ConfigError("config: system.preset must be alternating-log");
    sys.B = std::make_shared<const TimeVaryingOperator>(TimeVaryingOperator::scalar_constant(1.0));
    sys.psi = NonlinearTerm::input_map(sys.B);
    sys.family_stepper = Stepper::Exact;
    sys.sim_stepper = Stepper::Exact;
  } else if (s.kind == "pde-heat") {
    HeatConfig hc;
    hc.nu = s.nu;
    hc.omega = s.omega;
    hc.r = s.r;
    hc.reaction = s.R_kind == "constant" ? HeatConfig::Reaction::ConstantScalar
                                         : HeatConfig::Reaction::CosineScalar;
    hc.grid = Grid1D{s.ell, s.n};
    auto [A, psi] = heat_operator(hc);
    sys.A = std::move(A);
    sys.psi = std::move(psi);
    sys.dim = s.n;
    sys.state_weight = hc.grid.norm_weight();
    sys.B = std::make_shared<const TimeVaryingOperator>(TimeVaryingOperator::constant(
        Eigen::MatrixXd::Identity(s.n, s.n), hc.grid.norm_weight()));
    sys.heat = hc;
    sys.family_stepper = Stepper::Exact;
    sys.sim_stepper = Stepper::Exact;
  } else {  // pde-ks
    KSConfig kc;
    kc.rho = s.rho;
    const double mu = s.mu;
    kc.mu_fn = [mu](double) { return mu; };
    kc.mu_sup = mu;
    kc.grid = Grid1D{1.0, s.n};
    auto [A, psi] = ks_operator(kc);
    sys.A = std::move(A);
    sys.psi = std::move(psi);
    sys.dim = s.n;
    sys.state_weight = kc.grid.norm_weight();
    sys.ks = kc;
    sys.family_stepper = Stepper::Exact;
    sys.sim_stepper = Stepper::ImplicitEuler;
  }
  sys.sim_stepper = parse_stepper(cfg.solver.stepper, sys.sim_stepper);
  return sys;
}

// Scalar input profile pieces assembled from the [input] section; the
// embedding maps the scalar value into the system's input space.
InputSignal build_input(const ExperimentConfig& cfg, const BuiltSystem& sys) {
  const auto& in = cfg.input;
  const bool grid_valued = in.broadcast && sys.dim > 1;
  const int dim = (sys.B && sys.dim > 1) ? sys.dim : (grid_valued ? sys.dim : 1);
  const double weight = dim > 1 ? sys.state_weight : 1.0;

  // Scalar value of the configured profile times the embedding direction:
  // all-ones for broadcast grids, the first basis vector otherwise.
  Eigen::VectorXd direction = Eigen::VectorXd::Zero(dim);
  if (grid_valued)
    direction = Eigen::VectorXd::Ones(dim);
  else
    direction(0) = 1.0;
  const double dir_norm = std::sqrt(weight) * direction.norm();

  struct ScalarPiece {
    double start;
    std::function<double(double)> f;
    double sup;
  };
  std::vector<ScalarPiece> pieces;
  if (in.kind == "zero") {
    pieces.push_back({0.0, [](double) { return 0.0; }, 0.0});
  } else if (in.kind == "const") {
    const double a = in.amplitude;
    if (in.t_start > 0.0) pieces.push_back({0.0, [](double) { return 0.0; }, 0.0});
    pieces.push_back({std::max(0.0, in.t_start), [a](double) { return a; }, std::abs(a)});
  } else if (in.kind == "sine") {
    const double a = in.amplitude, w = in.frequency, p = in.phase;
    pieces.push_back({0.0, [a, w, p](double t) { return a * std::sin(w * t + p); }, std::abs(a)});
  } else if (in.kind == "ramp") {
    const double sl = in.slope, cap = in.cap, t0 = in.t_start;
    pieces.push_back(
        {0.0, [sl, cap, t0](double t) { return std::min(sl * std::max(0.0, t - t0), cap); },
         sl > 0.0 ? cap : 0.0});
  } else {  // sample-grid
    for (std::size_t i = 0; i < in.times.size(); ++i) {
      const double v = in.values[i];
      pieces.push_back({in.times[i], [v](double) { return v; }, std::abs(v)});
    }
    if (pieces.front().start != 0.0)
      pieces.insert(pieces.begin(), {0.0, [](double) { return 0.0; }, 0.0});
  }

  std::vector<InputSignal::Piece> out;
  for (const auto& p : pieces) {
    out.push_back({p.start,
                   [f = p.f, direction](double t) { return Eigen::VectorXd(direction * f(t)); },
                   p.sup * dir_norm, p.start});
  }
  return InputSignal(dim, std::move(out), weight);
}

Eigen::VectorXd random_state(std::mt19937_64& rng, int dim, double weight, double scale) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::VectorXd x(dim);
  for (int i = 0; i < dim; ++i) x(i) = gauss(rng);
  const double nrm = std::sqrt(weight) * x.norm();
  if (nrm > 0.0) x *= scale / nrm;
  return x;
}

SolveOptions solve_options(const ExperimentConfig& cfg, const BuiltSystem& sys) {
  SolveOptions opt;
  opt.stepper = sys.sim_stepper;
  opt.dt = cfg.solver.dt;
  opt.blowup_cap = cfg.solver.blowup_cap;
  opt.record_dt = cfg.solver.record_dt;
  return opt;
}

ClassifyOptions classify_options(const ExperimentConfig& cfg) {
  ClassifyOptions opt;
  for (double t0 = 0.0; t0 <= cfg.classify.t0_max + 1e-12; t0 += cfg.classify.t0_step)
    opt.t0_grid.push_back(t0);
  opt.horizon = cfg.classify.horizon;
  opt.T_step = cfg.classify.T_step;
  opt.eps_levels = cfg.classify.eps;
  opt.stability_cap = cfg.classify.cap;
  opt.ubrs_cap = cfg.classify.cap;
  opt.saturation_tol = cfg.classify.saturation_tol;
  opt.ubrs_sample_dt = cfg.classify.sample_dt;
  opt.fit_lower_envelope = cfg.classify.lower_envelope;
  return opt;
}

std::string yesno(bool b) { return b ? "yes" : "no"; }

std::string classify_report_text(const ExperimentConfig& cfg, const StabilityReport& rep) {
  std::ostringstream out;
  out.precision(6);
  out << "stability classification (" << cfg.system.kind << ")\n";
  out << "  uniformly stable (US)                : " << yesno(rep.uniformly_stable)
      << "   N = " << rep.N << "\n";
  out << "  uniformly attractive (UA)            : " << yesno(rep.uniformly_attractive) << "  ";
  for (const auto& at : rep.attract_times) {
    out << " T(" << at.eps << ")=";
    if (at.found || at.extrapolated)
      out << at.T << (at.extrapolated ? "*" : "");
    else
      out << "n/a";
  }
  out << (rep.uniformly_attractive ? "" : "   (levels not reached inside the horizon)") << "\n";
  out << "  UBRS                                 : " << yesno(rep.ubrs) << "   K = " << rep.K
      << (rep.ubrs_power_bound_ok ? "  (window bound K^ceil(T): ok)" : "") << "\n";
  out << "  uniformly exponentially stable (UES) : "
      << yesno(rep.uniformly_exponentially_stable);
  if (rep.uniformly_exponentially_stable) out << "   k = " << rep.k << ", w = " << rep.w;
  out << "\n";
  if (rep.lower_envelope) {
    out << "  lower norm envelope                  : M = " << rep.lower_envelope->first
        << ", lambda = " << rep.lower_envelope->second << "\n";
  }
  out << "\n";
  out << "implication chain: UES => UAS => (UA and UBRS)\n";
  out << "  UES=" << yesno(rep.uniformly_exponentially_stable) << " => UAS="
      << yesno(rep.uniformly_stable && rep.uniformly_attractive) << " [US="
      << yesno(rep.uniformly_stable) << " and UA=" << yesno(rep.uniformly_attractive)
      << "] => UA=" << yesno(rep.uniformly_attractive) << ", UBRS=" << yesno(rep.ubrs) << "\n";
  out << "  (* = attraction time extrapolated from the exponential majorant)\n";
  return out.str();
}

void write_norm_table(const std::string& path, const StabilityReport& rep) {
  CsvWriter csv(path, {"T", "sup_norm", "min_singular_value"});
  for (std::size_t i = 0; i < rep.T_grid.size(); ++i) {
    const double sv = rep.min_sv_table[i];
    csv.row({rep.T_grid[i], rep.sup_norm_table[i], std::isfinite(sv) ? sv : -1.0});
  }
}

struct EnsembleRun {
  std::vector<Eigen::VectorXd> x0;
  std::vector<Trajectory> traj;
  std::shared_ptr<const InputSignal> input;
};

EnsembleRun run_ensemble(const ExperimentConfig& cfg, const BuiltSystem& sys,
                         const InputSignal& u, std::mt19937_64& rng) {
  EnsembleRun run;
  run.input = std::make_shared<const InputSignal>(u);
  const auto opt = solve_options(cfg, sys);
  // Initial states are drawn up front so the ensemble is deterministic; the
  // independent members then integrate concurrently and a single collector
  // gathers the results in order.
  for (int m = 0; m < cfg.ensemble.count; ++m) {
    const double scale = cfg.ensemble.x0_scales[m % cfg.ensemble.x0_scales.size()];
    run.x0.push_back(sys.dim == 1 ? Eigen::VectorXd::Constant(1, scale)
                                  : random_state(rng, sys.dim, sys.state_weight, scale));
  }
  std::vector<std::future<Trajectory>> futures;
  futures.reserve(run.x0.size());
  for (const auto& x0 : run.x0) {
    futures.push_back(std::async(std::launch::async, [&, x0]() {
      return solve_mild(sys.A, sys.psi, cfg.ensemble.t0, x0, u, cfg.solver.t_end, opt);
    }));
  }
  for (auto& f : futures) run.traj.push_back(f.get());
  return run;
}

void write_trajectory_csv(const std::string& path, const Trajectory& traj, int dim) {
  std::vector<std::string> cols{"t", "norm_x", "escaped"};
  const bool with_state = dim <= 8;
  if (with_state)
    for (int i = 0; i < dim; ++i) cols.push_back("x" + std::to_string(i));
  CsvWriter csv(path, cols);
  for (std::size_t i = 0; i < traj.t.size(); ++i) {
    std::vector<double> row{traj.t[i], traj.norm[i],
                            (traj.escaped && i + 1 == traj.t.size()) ? 1.0 : 0.0};
    if (with_state)
      for (int j = 0; j < dim; ++j) row.push_back(traj.x[i](j));
    csv.row(row);
  }
}

// Forward-difference derivative of a scalar certificate along a fresh short
// flow leg, with an h/2 consistency refinement.
double certificate_rate(const std::function<double(double, const Eigen::VectorXd&)>& value,
                        const BuiltSystem& sys, double t, const Eigen::VectorXd& x,
                        const InputSignal& u, double h, const SolveOptions& base) {
  SolveOptions opt = base;
  opt.record_dt = 0.0;
  opt.dt = h / 8.0;
  const double v0 = value(t, x);
  const Trajectory leg = solve_mild(sys.A, sys.psi, t, x, u, t + h, opt);
  if (leg.escaped) throw EscapedError("certificate rate: escape on the short leg");
  const Trajectory half = solve_mild(sys.A, sys.psi, t, x, u, t + 0.5 * h, opt);
  if (half.escaped) throw EscapedError("certificate rate: escape on the short leg");
  (void)leg;
  return (value(t + 0.5 * h, half.final_state()) - v0) / (0.5 * h);
}

void plot_norms(const std::string& path, const EnsembleRun& run,
                const std::function<double(double, double)>* envelope, double t0) {
  SvgChart chart("trajectory norms", "t", "|x(t)|");
  chart.set_log_y(false);
  int idx = 0;
  for (const auto& traj : run.traj) {
    chart.add_line("member " + std::to_string(idx++), traj.t, traj.norm);
    if (idx >= 10) break;  // keep the plot readable
  }
  if (envelope && !run.traj.empty()) {
    std::vector<double> ts, vs;
    const double t_end = run.traj.front().final_time();
    for (double t = t0; t <= t_end; t += (t_end - t0) / 200.0) {
      ts.push_back(t);
      vs.push_back((*envelope)(t, t - t0));
    }
    chart.add_line("envelope", ts, vs);
  }
  chart.write(path);
}

void plot_dissipation(const std::string& path, const std::vector<DissipationRow>& rows) {
  SvgChart chart("certificate rate vs. bound", "rhs bound", "estimated rate");
  std::vector<double> xs, ys;
  double lo = 0.0, hi = 0.0;
  for (const auto& r : rows) {
    xs.push_back(r.rhs);
    ys.push_back(r.Vdot);
    lo = std::min({lo, r.rhs, r.Vdot});
    hi = std::max({hi, r.rhs, r.Vdot});
  }
  chart.add_scatter("samples", xs, ys);
  chart.add_line("equality", {lo, hi}, {lo, hi});
  chart.write(path);
}

}  // namespace

ExperimentConfig resolve_config(const std::optional<std::string>& config_path,
                                const std::optional<std::string>& preset,
                                const CliOverrides& overrides) {
  ExperimentConfig cfg;
  if (config_path && preset)
    throw ConfigError("pass either --config or --system, not both");
  if (config_path)
    cfg = parse_config_file(*config_path);
  else if (preset)
    cfg = parse_config_text(preset_config(*preset));
  else
    throw ConfigError("a configuration is required: --config PATH or --system NAME");

  if (overrides.out_dir) cfg.output.dir = *overrides.out_dir;
  if (overrides.seed) cfg.seed = *overrides.seed;
  if (overrides.dt) cfg.solver.dt = *overrides.dt;
  if (overrides.n) cfg.system.n = *overrides.n;
  if (overrides.rho) cfg.system.rho = *overrides.rho;
  if (overrides.r_plus_omega) {
    // Worst case within sup |R(t)| = r: the constant reaction r I carries the
    // whole budget, so the threshold arithmetic decides growth exactly.
    cfg.system.r = *overrides.r_plus_omega;
    cfg.system.omega = 0.0;
    cfg.system.R_kind = "constant";
  }
  validate_config(cfg);
  return cfg;
}

int cmd_simulate(const ExperimentConfig& cfg, bool fail_on_escape) {
  const BuiltSystem sys = build_system(cfg);
  const InputSignal u = build_input(cfg, sys);
  std::mt19937_64 rng(cfg.seed);
  fs::create_directories(cfg.output.dir);

  const EnsembleRun run = run_ensemble(cfg, sys, u, rng);
  int escapes = 0;
  double max_norm = 0.0;
  for (std::size_t m = 0; m < run.traj.size(); ++m) {
    char name[32];
    std::snprintf(name, sizeof(name), "member_%03zu.csv", m);
    write_trajectory_csv((fs::path(cfg.output.dir) / name).string(), run.traj[m], sys.dim);
    escapes += run.traj[m].escaped ? 1 : 0;
    max_norm = std::max(max_norm, run.traj[m].max_norm());
  }

  std::ofstream summary(fs::path(cfg.output.dir) / "summary.txt");
  summary << "command: simulate\n"
          << "system: " << cfg.system.kind << "\n"
          << "rng: " << kRngName << " seed=" << cfg.seed << "\n"
          << "members: " << run.traj.size() << "\n"
          << "escapes: " << escapes << "\n"
          << "max_norm: " << max_norm << "\n";
  std::cout << "simulate: " << run.traj.size() << " member(s), " << escapes
            << " escape(s), max norm " << max_norm << "\n";
  if (escapes > 0 && fail_on_escape) return kExitEscape;
  return kExitOk;
}

int cmd_classify(const ExperimentConfig& cfg) {
  const BuiltSystem sys = build_system(cfg);
  EvolutionFamily W(sys.A, sys.family_stepper, cfg.solver.dt);
  const StabilityReport rep = W.classify(classify_options(cfg));

  fs::create_directories(cfg.output.dir);
  const std::string text = classify_report_text(cfg, rep);
  std::ofstream(fs::path(cfg.output.dir) / "classification.txt") << text;
  write_norm_table((fs::path(cfg.output.dir) / "norm_table.csv").string(), rep);
  std::cout << text;
  return kExitOk;
}

namespace {

int certify_ks(const ExperimentConfig& cfg) {
  const BuiltSystem sys = build_system(cfg);
  const KSConfig& kc = *sys.ks;

  const double sigma = ks_sigma(kc);
  if (!(sigma > 0.0)) {
    std::cout << "certify: not applicable; decay constant sigma(rho=" << kc.rho
              << ") = " << sigma << " is not positive\n";
    return kExitNotApplicable;
  }
  const KSCertificate cert = ks_certificate(kc);

  std::mt19937_64 rng(cfg.seed);
  const InputSignal u = build_input(cfg, sys);
  fs::create_directories(cfg.output.dir);
  const EnsembleRun run = run_ensemble(cfg, sys, u, rng);

  // Dissipation of V = ln(1 + Z) along trajectory samples:
  // Vdot <= -theta(|x|) + chi(|u(t)|).
  const double h = std::min(cfg.certify.lie_h, 0.005 / sigma);
  const auto base_opt = solve_options(cfg, sys);
  std::vector<DissipationRow> rows;
  double max_violation = -1e300, scale = 1e-12;
  for (const auto& traj : run.traj) {
    if (traj.escaped) continue;
    const std::size_t stride =
        std::max<std::size_t>(1, traj.t.size() / static_cast<std::size_t>(cfg.certify.sample_points));
    for (std::size_t i = 0; i + 1 < traj.t.size(); i += stride) {
      const double t = traj.t[i];
      const Eigen::VectorXd& x = traj.x[i];
      const double vdot = certificate_rate(cert.V, sys, t, x, u, h, base_opt);
      const double nx = kc.grid.l2_norm(x);
      const double nu = u.value_norm(t);
      const double rhs = -cert.theta(nx) + cert.chi(nu);
      rows.push_back({t, nx, nu, cert.V(t, x), vdot, rhs, vdot - rhs});
      max_violation = std::max(max_violation, vdot - rhs);
      scale = std::max({scale, std::abs(vdot), std::abs(rhs)});
    }
  }
  const bool diss_ok = max_violation <= cfg.certify.tol_rel * scale;

  // Integral-to-state estimate with the proof-shaped gains: alpha(s) =
  // sqrt(exp(2s) - 1) (inverse of ln(1 + s^2) at 2s), mu = 4 s, envelope
  // fitted from the zero-input runs of the same initial states.
  const auto opt = solve_options(cfg, sys);
  std::vector<ZeroInputRun> free_runs;
  for (const auto& x0 : run.x0) {
    const Trajectory traj =
        solve_mild(sys.A, sys.psi, cfg.ensemble.t0, x0, InputSignal::zero(), cfg.solver.t_end, opt);
    ZeroInputRun zr;
    zr.t0 = cfg.ensemble.t0;
    zr.x0_norm = kc.grid.l2_norm(x0);
    for (std::size_t i = 0; i < traj.t.size(); ++i) {
      zr.tau.push_back(traj.t[i] - cfg.ensemble.t0);
      zr.norm.push_back(traj.norm[i]);
    }
    free_runs.push_back(std::move(zr));
  }
  const ComparisonFunction beta = fit_kl_envelope(free_runs);
  const auto alpha = ComparisonFunction::custom(
      FunctionClass::Kinf, [](double s) { return std::sqrt(std::expm1(2.0 * s)); });
  const auto mu = ComparisonFunction::linear(4.0);
  std::vector<IissCase> cases;
  for (const auto& x0 : run.x0) cases.push_back({cfg.ensemble.t0, x0, run.input});
  const EstimateReport est = check_iiss_estimate(sys.A, sys.psi, nullptr, cases, alpha, mu, beta,
                                                 cfg.solver.t_end, opt, 1e-6);

  // Outputs.
  {
    CsvWriter csv((fs::path(cfg.output.dir) / "dissipation.csv").string(),
                  {"t", "norm_x", "norm_u", "V", "Vdot", "rhs", "violation"});
    for (const auto& r : rows) csv.row({r.t, r.norm_x, r.norm_u, r.V, r.Vdot, r.rhs, r.violation});
  }
  plot_norms((fs::path(cfg.output.dir) / "norms.svg").string(), run, nullptr, cfg.ensemble.t0);
  plot_dissipation((fs::path(cfg.output.dir) / "dissipation_scatter.svg").string(), rows);

  std::ostringstream text;
  text.precision(6);
  text << "certification (pde-ks, rho = " << kc.rho << ", n = " << kc.grid.n << ")\n"
       << "  certificate  : V = ln(1 + (1+e^-t) |x|^2), theta(s) = sigma s^2/(1+2s^2), chi(s) = 2s\n"
       << "  sigma        : " << sigma << "\n"
       << "  dissipation  : max violation " << max_violation << " (scale " << scale
       << ", relative " << max_violation / scale << ", tolerance " << cfg.certify.tol_rel
       << ") => " << (diss_ok ? "pass" : "FAIL") << "\n"
       << "  estimate     : beta(r,t) = " << beta.kl_scale() << " r exp(-" << beta.kl_rate()
       << " t), alpha(s) = sqrt(e^{2s}-1), mu(s) = 4s\n"
       << "                 " << est.points << " samples, " << est.violations
       << " violation(s), worst ratio " << est.worst_ratio << " => "
       << (est.violations == 0 ? "pass" : "FAIL") << "\n"
       << "  rng          : " << kRngName << " seed=" << cfg.seed << "\n";
  std::ofstream(fs::path(cfg.output.dir) / "certification.txt") << text.str();
  std::cout << text.str();
  return (diss_ok && est.violations == 0) ? kExitOk : kExitCheckFailed;
}

int certify_heat(const ExperimentConfig& cfg) {
  const BuiltSystem sys = build_system(cfg);
  const HeatConfig& hc = *sys.heat;
  const double eps = cfg.certify.epsilon;

  const bool threshold = heat_threshold_check(hc, eps);
  auto family = std::make_shared<EvolutionFamily>(sys.A, sys.family_stepper, cfg.solver.dt);
  const StabilityReport rep = family->classify(classify_options(cfg));
  if (!threshold || !rep.uniformly_exponentially_stable) {
    std::cout << "certify: not applicable; r + |omega| = " << hc.r + std::abs(hc.omega)
              << (threshold ? "" : " fails the decay threshold") << " and the classifier reports "
              << (rep.uniformly_exponentially_stable ? "UES" : "no uniform exponential decay")
              << " (zero-input growth)\n";
    return kExitNotApplicable;
  }

  std::mt19937_64 rng(cfg.seed);
  const InputSignal u = build_input(cfg, sys);
  fs::create_directories(cfg.output.dir);
  const EnsembleRun run = run_ensemble(cfg, sys, u, rng);

  // Quadratic certificate V = |x|^2 with the epsilon-split bound
  //   Vdot <= (-2 nu pi^2/ell^2 + 2(r + |omega|) + eps) V + (ell/eps)|u(t)|^2.
  const double pi = std::acos(-1.0);
  const double decay =
      -2.0 * hc.nu * pi * pi / (hc.grid.ell * hc.grid.ell) + 2.0 * (hc.r + std::abs(hc.omega)) + eps;
  const double gain = hc.grid.ell / eps;
  auto quad = [&hc](double, const Eigen::VectorXd& x) {
    return hc.grid.dz() * x.squaredNorm();
  };

  const auto base_opt = solve_options(cfg, sys);
  std::vector<DissipationRow> rows;
  double max_violation = -1e300, scale = 1e-12;
  for (const auto& traj : run.traj) {
    if (traj.escaped) continue;
    const std::size_t stride =
        std::max<std::size_t>(1, traj.t.size() / static_cast<std::size_t>(cfg.certify.sample_points));
    for (std::size_t i = 0; i + 1 < traj.t.size(); i += stride) {
      const double t = traj.t[i];
      const Eigen::VectorXd& x = traj.x[i];
      const double vdot = certificate_rate(quad, sys, t, x, u, cfg.certify.lie_h, base_opt);
      const double V = quad(t, x);
      const double nu_t = u.value_norm(t);
      const double rhs = decay * V + gain * nu_t * nu_t;
      rows.push_back({t, hc.grid.l2_norm(x), nu_t, V, vdot, rhs, vdot - rhs});
      max_violation = std::max(max_violation, vdot - rhs);
      scale = std::max({scale, std::abs(vdot), std::abs(rhs)});
    }
  }
  const bool diss_ok = max_violation <= cfg.certify.tol_rel * scale;

  // Trajectory estimate |phi(t)| <= beta(|x0|, t-t0) + gamma(|u|_sup) with the
  // envelope fitted on zero-input runs and the linear gain gamma(s) = (k|B|/w) s.
  const auto opt = solve_options(cfg, sys);
  std::vector<ZeroInputRun> free_runs;
  for (const auto& x0 : run.x0) {
    const Trajectory traj =
        solve_mild(sys.A, sys.psi, cfg.ensemble.t0, x0, InputSignal::zero(), cfg.solver.t_end, opt);
    ZeroInputRun zr;
    zr.t0 = cfg.ensemble.t0;
    zr.x0_norm = hc.grid.l2_norm(x0);
    for (std::size_t i = 0; i < traj.t.size(); ++i) {
      zr.tau.push_back(traj.t[i] - cfg.ensemble.t0);
      zr.norm.push_back(traj.norm[i]);
    }
    free_runs.push_back(std::move(zr));
  }
  const ComparisonFunction beta = fit_kl_envelope(free_runs);
  const double gamma_slope = rep.k * 1.0 / rep.w;  // |B| = 1 for the identity input map
  int est_violations = 0, est_points = 0;
  double worst_excess = -1e300;
  for (std::size_t m = 0; m < run.traj.size(); ++m) {
    const auto& traj = run.traj[m];
    const double x0n = hc.grid.l2_norm(run.x0[m]);
    for (std::size_t i = 0; i < traj.t.size(); ++i) {
      const double rhs =
          beta(x0n, traj.t[i] - cfg.ensemble.t0) + gamma_slope * u.sup_norm() + 1e-9;
      ++est_points;
      if (traj.norm[i] > rhs) ++est_violations;
      worst_excess = std::max(worst_excess, traj.norm[i] - rhs);
    }
  }
  const EnvelopeFit fit{beta, ComparisonFunction::linear(gamma_slope), worst_excess};

  {
    CsvWriter csv((fs::path(cfg.output.dir) / "dissipation.csv").string(),
                  {"t", "norm_x", "norm_u", "V", "Vdot", "rhs", "violation"});
    for (const auto& r : rows) csv.row({r.t, r.norm_x, r.norm_u, r.V, r.Vdot, r.rhs, r.violation});
  }
  const double x0_max =
      *std::max_element(cfg.ensemble.x0_scales.begin(), cfg.ensemble.x0_scales.end());
  std::function<double(double, double)> envelope = [&](double, double tau) {
    return fit.beta(x0_max, tau) + gamma_slope * u.sup_norm();
  };
  plot_norms((fs::path(cfg.output.dir) / "norms_envelope.svg").string(), run, &envelope,
             cfg.ensemble.t0);
  plot_dissipation((fs::path(cfg.output.dir) / "dissipation_scatter.svg").string(), rows);

  std::ostringstream text;
  text.precision(6);
  text << "certification (pde-heat, nu = " << hc.nu << ", ell = " << hc.grid.ell
       << ", r + |omega| = " << hc.r + std::abs(hc.omega) << ", n = " << hc.grid.n << ")\n"
       << "  threshold    : r + |omega| < nu pi^2/ell^2 => pass (epsilon = " << eps << ")\n"
       << "  constants    : N = " << rep.N << ", K = " << rep.K << ", k = " << rep.k
       << ", w = " << rep.w << ", epsilon = " << eps << "\n"
       << "  dissipation  : V = |x|^2, rhs = (" << decay << ") V + (" << gain
       << ") |u(t)|^2; max violation " << max_violation << " (relative "
       << max_violation / scale << ", tolerance " << cfg.certify.tol_rel << ") => "
       << (diss_ok ? "pass" : "FAIL") << "\n"
       << "  estimate     : beta(r,t) = " << beta.kl_scale() << " r exp(-" << beta.kl_rate()
       << " t), gamma(s) = " << gamma_slope << " s; " << est_points << " samples, "
       << est_violations << " violation(s), residual " << fit.residual << " => "
       << (est_violations == 0 ? "pass" : "FAIL") << "\n"
       << "  rng          : " << kRngName << " seed=" << cfg.seed << "\n";
  std::ofstream(fs::path(cfg.output.dir) / "certification.txt") << text.str();
  std::cout << text.str();
  return (diss_ok && est_violations == 0) ? kExitOk : kExitCheckFailed;
}

int certify_linear(const ExperimentConfig& cfg) {
  const BuiltSystem sys = build_system(cfg);
  auto family = std::make_shared<EvolutionFamily>(sys.A, sys.family_stepper, cfg.solver.dt);
  ClassifyOptions copt = classify_options(cfg);
  copt.fit_lower_envelope = true;
  const StabilityReport rep = family->classify(copt);
  if (!rep.uniformly_exponentially_stable) {
    std::cout << "certify: not applicable; the evolution family is not uniformly "
                 "exponentially stable on the sampled grids\n";
    return kExitNotApplicable;
  }

  std::mt19937_64 rng(cfg.seed);
  const InputSignal u = build_input(cfg, sys);
  fs::create_directories(cfg.output.dir);
  const EnsembleRun run = run_ensemble(cfg, sys, u, rng);

  const auto V = build_V(family, rep.k, rep.w, cfg.certify.T_tail_factor, cfg.certify.quad_dt);

  // Ensemble points sampled along the trajectories.
  std::vector<EnsemblePoint> pts;
  for (const auto& traj : run.traj) {
    if (traj.escaped) continue;
    const std::size_t stride =
        std::max<std::size_t>(1, traj.t.size() / static_cast<std::size_t>(cfg.certify.sample_points));
    for (std::size_t i = 0; i + 1 < traj.t.size(); i += stride)
      pts.push_back({traj.t[i], traj.x[i], run.input});
  }

  LieOptions lopt;
  lopt.h = cfg.certify.lie_h;
  lopt.solve = solve_options(cfg, sys);
  const double eta_max = 2.0 * rep.w / (rep.k * rep.k);
  bool all_ok = true;
  std::ostringstream text;
  text.precision(6);
  text << "certification (" << cfg.system.kind << ")\n"
       << "  constants    : N = " << rep.N << ", K = " << rep.K << ", k = " << rep.k
       << ", w = " << rep.w;
  if (rep.lower_envelope)
    text << ", M = " << rep.lower_envelope->first << ", lambda = " << rep.lower_envelope->second;
  text << "\n";

  int eta_index = 0;
  for (double frac : cfg.certify.eta_fracs) {
    const double eta = frac * eta_max;
    const DissipationReport rep_eta = check_dissipation_iss(V, sys.A, sys.B, pts, eta, lopt);
    const bool ok = rep_eta.max_violation <= cfg.certify.tol_rel * std::max(rep_eta.scale, 1e-12);
    all_ok = all_ok && ok;
    char name[48];
    std::snprintf(name, sizeof(name), "dissipation_eta%d.csv", eta_index++);
    CsvWriter csv((fs::path(cfg.output.dir) / name).string(),
                  {"t", "norm_x", "norm_u", "V", "Vdot", "rhs", "violation"});
    for (const auto& r : rep_eta.rows)
      csv.row({r.t, r.norm_x, r.norm_u, r.V, r.Vdot, r.rhs, r.violation});
    if (eta_index == 1)
      plot_dissipation((fs::path(cfg.output.dir) / "dissipation_scatter.svg").string(),
                       rep_eta.rows);
    text << "  dissipation  : eta = " << eta << " -> max violation " << rep_eta.max_violation
         << " (scale " << rep_eta.scale << ") => " << (ok ? "pass" : "FAIL")
         << "   [input gain coeff (squared |B|): " << rep_eta.squared_gain_coeff
         << ", stated first-power variant: " << rep_eta.linear_gain_coeff << "]\n";
  }

  // Operator certificate for bounded generators at desk dimensions.
  if (sys.A.bound_sup() && sys.dim <= 8) {
    std::vector<double> grid;
    for (double t = 0.0; t <= 2.0; t += 0.5) grid.push_back(t);
    const auto pres = build_P(sys.A, *family, grid, {rep.k, rep.w}, cfg.certify.T_tail_factor,
                              cfg.certify.quad_dt);
    text << "  operator eq. : max residual |A'P + PA + P' + I| = " << pres.max_residual << "\n";
  }

  if (rep.lower_envelope) {
    auto Z = build_Z(std::make_shared<LyapunovCertificate>(V), rep.lower_envelope);
    text << "  log certificate: ln(1 + " << *Z.lower_quad_coeff()
         << " |x|^2) <= Z <= ln(1 + " << Z.upper_quad_coeff() << " |x|^2)\n";
  }
  text << "  rng          : " << kRngName << " seed=" << cfg.seed << "\n";

  plot_norms((fs::path(cfg.output.dir) / "norms.svg").string(), run, nullptr, cfg.ensemble.t0);
  std::ofstream(fs::path(cfg.output.dir) / "certification.txt") << text.str();
  std::cout << text.str();
  return all_ok ? kExitOk : kExitCheckFailed;
}

}  // namespace

int cmd_certify(const ExperimentConfig& cfg) {
  if (cfg.system.kind == "pde-ks") return certify_ks(cfg);
  if (cfg.system.kind == "pde-heat") return certify_heat(cfg);
  return certify_linear(cfg);
}

namespace {

struct CheckTable {
  std::vector<std::pair<std::string, bool>> checks;
  bool add(const std::string& name, bool ok) {
    checks.emplace_back(name, ok);
    std::cout << (ok ? "[pass] " : "[FAIL] ") << name << "\n";
    return ok;
  }
  bool all() const {
    return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.second; });
  }
  void write(const std::string& path) const {
    std::ofstream out(path);
    for (const auto& [name, ok] : checks) out << (ok ? "pass" : "FAIL") << "  " << name << "\n";
    out << (all() ? "ALL CHECKS PASSED\n" : "SOME CHECKS FAILED\n");
  }
};

int reproduce_appendix(const std::string& out_dir, std::uint64_t seed) {
  ExperimentConfig cfg = parse_config_text(preset_config("appendix"));
  cfg.seed = seed;
  cfg.output.dir = out_dir;
  fs::create_directories(out_dir);

  EvolutionFamily W(make_alternating_log_scalar(), Stepper::Exact, cfg.solver.dt);
  CheckTable table;

  // Exact one-interval contractions and half-interval growth factors.
  CsvWriter csv((fs::path(out_dir) / "propagator_table.csv").string(),
                {"k", "W_unit", "W_unit_expected", "W_half_norm", "W_half_expected"});
  bool exact_ok = true;
  for (int k = 0; k <= 9; ++k) {
    const double unit = W.matrix(k, k + 1.0)(0, 0);
    const double unit_expected = 1.0 / (2.0 * (k + 1.0));
    const double half = W.operator_norm(k + 0.5, k + 1.0);
    const double half_expected = k + 1.0;
    exact_ok = exact_ok && std::abs(unit - unit_expected) <= 1e-12 &&
               std::abs(half - half_expected) <= 1e-12 * half_expected;
    csv.row({static_cast<double>(k), unit, unit_expected, half, half_expected});
  }
  table.add("unit-interval contraction 1/(2(k+1)) and half-interval growth k+1, k=0..9, to 1e-12",
            exact_ok);

  const StabilityReport rep = W.classify(classify_options(cfg));
  table.add("uniformly attractive", rep.uniformly_attractive);
  bool tbound = true;
  for (const auto& at : rep.attract_times) {
    const int m = static_cast<int>(std::ceil(-std::log2(at.eps)));
    tbound = tbound && at.found && at.T <= m + 1.0 + 1e-9;
  }
  table.add("attraction times T(eps) <= m+1 with 2^-m < eps", tbound);
  table.add("not uniformly stable", !rep.uniformly_stable);
  table.add("not UBRS", !rep.ubrs);

  std::ofstream(fs::path(out_dir) / "classification.txt") << classify_report_text(cfg, rep);
  write_norm_table((fs::path(out_dir) / "norm_table.csv").string(), rep);
  table.write((fs::path(out_dir) / "report.txt").string());
  return table.all() ? kExitOk : kExitCheckFailed;
}

int reproduce_ks(const std::string& out_dir, std::uint64_t seed) {
  fs::create_directories(out_dir);
  CheckTable table;

  // Sign of the decay constant across the threshold, two resolutions.
  CsvWriter csv((fs::path(out_dir) / "sigma_table.csv").string(), {"rho", "n", "sigma"});
  double sigma_stable = 0.0;
  bool signs_ok = true;
  for (double rho : {30.0, 45.0}) {
    for (int n : {128, 256}) {
      KSConfig kc;
      kc.rho = rho;
      kc.grid.n = n;
      const double sigma = ks_sigma(kc);
      csv.row({rho, static_cast<double>(n), sigma});
      if (rho < 4.0 * M_PI * M_PI) {
        signs_ok = signs_ok && sigma > 0.0;
        if (n == 128) sigma_stable = sigma;
      } else {
        signs_ok = signs_ok && sigma < 0.0;
      }
    }
  }
  table.add("sigma(30) > 0 and sigma(45) < 0 at n = 128, signs agree at n = 256", signs_ok);

  // Dissipation check below the threshold.
  ExperimentConfig cfg = parse_config_text(preset_config("ks"));
  cfg.seed = seed;
  cfg.output.dir = (fs::path(out_dir) / "certify").string();
  const int code = cmd_certify(cfg);
  table.add("iISS dissipation check at rho = 30 (20-member ensemble)", code == kExitOk);

  // Zero-input growth above the threshold.
  {
    ExperimentConfig gcfg = parse_config_text(preset_config("ks"));
    gcfg.seed = seed;
    gcfg.system.rho = 45.0;
    gcfg.input.kind = "zero";
    gcfg.solver.t_end = 0.5;
    gcfg.ensemble.count = 4;
    const BuiltSystem sys = build_system(gcfg);
    std::mt19937_64 rng(gcfg.seed);
    const InputSignal u = build_input(gcfg, sys);
    const EnsembleRun run = run_ensemble(gcfg, sys, u, rng);
    double best_growth = 0.0;
    CsvWriter gcsv((fs::path(out_dir) / "growth_table.csv").string(),
                   {"member", "x0_norm", "max_norm", "growth", "escaped"});
    for (std::size_t m = 0; m < run.traj.size(); ++m) {
      const double x0n = run.traj[m].norm.front();
      const double growth = run.traj[m].max_norm() / x0n;
      best_growth = std::max(best_growth, growth);
      gcsv.row({static_cast<double>(m), x0n, run.traj[m].max_norm(), growth,
                run.traj[m].escaped ? 1.0 : 0.0});
    }
    table.add("zero-input growth >= 10x for some initial state at rho = 45",
              best_growth >= 10.0);
  }

  table.write((fs::path(out_dir) / "report.txt").string());
  return table.all() ? kExitOk : kExitCheckFailed;
}

int reproduce_heat(const std::string& out_dir, std::uint64_t seed) {
  fs::create_directories(out_dir);
  CheckTable table;

  // Threshold table.
  CsvWriter csv((fs::path(out_dir) / "threshold_table.csv").string(),
                {"r_plus_omega", "epsilon", "below_threshold"});
  bool thresholds_ok = true;
  for (double rpo : {5.0, 9.0, 12.0}) {
    HeatConfig hc;
    hc.nu = 1.0;
    hc.grid = Grid1D{1.0, 128};
    hc.r = rpo / 2.0;
    hc.omega = rpo / 2.0;
    const bool ok = heat_threshold_check(hc, 0.1);
    csv.row({rpo, 0.1, ok ? 1.0 : 0.0});
    const double pi = std::acos(-1.0);
    thresholds_ok = thresholds_ok && (ok == (rpo + 0.1 / 2.0 < pi * pi));
  }
  table.add("threshold table at r + omega in {5, 9, 12}", thresholds_ok);

  // Certification below the threshold.
  ExperimentConfig cfg = parse_config_text(preset_config("heat"));
  cfg.seed = seed;
  cfg.output.dir = (fs::path(out_dir) / "certify").string();
  const int code = cmd_certify(cfg);
  table.add("dissipation and trajectory estimate at r + omega = 5", code == kExitOk);

  // Zero-input growth above the threshold: the classifier must not report
  // uniform exponential stability. The constant reaction r I is the member of
  // the sup-norm-r family that actually grows.
  {
    ExperimentConfig gcfg = parse_config_text(preset_config("heat"));
    gcfg.seed = seed;
    gcfg.system.r = 12.0;
    gcfg.system.omega = 0.0;
    gcfg.system.R_kind = "constant";
    gcfg.classify.horizon = 4.0;
    const BuiltSystem sys = build_system(gcfg);
    EvolutionFamily W(sys.A, sys.family_stepper, gcfg.solver.dt);
    bool not_ues = false;
    try {
      const StabilityReport rep = W.classify(classify_options(gcfg));
      not_ues = !rep.uniformly_exponentially_stable;
    } catch (const InconclusiveHorizonError&) {
      not_ues = false;
    }
    table.add("classifier reports no uniform exponential decay at r + omega = 12", not_ues);
  }

  table.write((fs::path(out_dir) / "report.txt").string());
  return table.all() ? kExitOk : kExitCheckFailed;
}

}  // namespace

int cmd_reproduce(const std::string& example, const std::string& out_dir, std::uint64_t seed) {
  const fs::path base = fs::path(out_dir) / ("reproduce_" + example);
  if (example == "appendix") return reproduce_appendix(base.string(), seed);
  if (example == "ks") return reproduce_ks(base.string(), seed);
  if (example == "heat") return reproduce_heat(base.string(), seed);
  throw ConfigError("reproduce: unknown example '" + example + "' (expected appendix, ks, heat)");
}

}  // namespace evolyap::tools
