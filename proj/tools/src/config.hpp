#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "evolyap/errors.hpp"

namespace evolyap::tools {

// Flat sectioned key=value experiment description. Parsed then validated;
// every parse or validation error names the offending section.key.
struct ExperimentConfig {
  struct System {
    std::string kind;  // matrix-constant | matrix-timevarying | piecewise-scalar | pde-heat | pde-ks
    int dim = 1;
    Eigen::MatrixXd A0, A1, A2;  // A(t) = A0 + sin(w1 t) A1 + cos(w2 t) A2
    double w1 = 1.0, w2 = 1.0;
    std::string preset;                // piecewise-scalar: alternating-log
    std::vector<double> times, values;  // piecewise-scalar table
    double nu = 1.0, ell = 1.0, omega = 0.0, r = 0.0;  // pde-heat
    std::string R_kind = "cosine";                     // cosine | constant
    double rho = 0.0, mu = 0.0;                        // pde-ks
    int n = 128;
  } system;

  struct Input {
    std::string kind = "zero";  // zero | const | sine | ramp | sample-grid
    double amplitude = 0.0, frequency = 1.0, phase = 0.0;
    double slope = 0.0, cap = 0.0, t_start = 0.0;
    std::vector<double> times, values;
    bool broadcast = false;  // constant-in-z grid profile for PDE systems
  } input;

  struct Ensemble {
    int count = 1;
    std::vector<double> x0_scales{1.0};
    double t0 = 0.0;
  } ensemble;

  struct Solver {
    std::string stepper;  // exact | rk4 | implicit-euler; empty = per-system default
    double dt = 1e-3, t_end = 5.0, blowup_cap = 1e8, record_dt = 0.01;
  } solver;

  struct Classify {
    double t0_max = 10.0, t0_step = 0.5, horizon = 12.0, T_step = 0.25, sample_dt = 0.05;
    std::vector<double> eps{0.5, 0.1, 0.01};
    bool lower_envelope = true;
    double cap = 1e6, saturation_tol = 0.5;
  } classify;

  struct Certify {
    double T_tail_factor = 8.0, quad_dt = 1e-3, lie_h = 1e-4;
    double epsilon = 0.1;   // Young parameter of the quadratic heat bound
    double tol_rel = 1e-2;  // relative dissipation tolerance
    std::vector<double> eta_fracs{0.2, 0.5, 0.9};
    int sample_points = 10;
  } certify;

  struct Output {
    std::string dir = "out";
  } output;

  std::uint64_t seed = 12345;
};

ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig parse_config_file(const std::string& path);

// Cross-field validation; throws ConfigError naming the offending key.
void validate_config(const ExperimentConfig& config);

}  // namespace evolyap::tools
