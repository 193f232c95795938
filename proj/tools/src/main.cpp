#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "commands.hpp"
#include "evolyap/errors.hpp"

using namespace evolyap;
using namespace evolyap::tools;

int main(int argc, char** argv) {
  CLI::App app{"evolyap: simulate time-varying evolution equations, classify their stability, "
               "and verify Lyapunov-based input-to-state estimates"};
  app.require_subcommand(1);
  app.fallthrough();

  std::optional<std::string> config_path, preset;
  CliOverrides ov;
  std::uint64_t seed = 12345;
  std::string out_dir = "out";
  bool fail_on_escape = false;
  double dt = 0.0;
  int n_override = 0;
  double r_plus_omega = 0.0, rho = 0.0;

  app.add_option("--config", config_path, "experiment configuration file");
  app.add_option("--system", preset, "built-in system preset (scalar-decay, appendix, heat, ks)");
  app.add_option("--out", out_dir, "output directory")->capture_default_str();
  app.add_option("--seed", seed, "ensemble RNG seed")->capture_default_str();
  app.add_flag("--fail-on-escape", fail_on_escape, "exit 2 when any trajectory escapes");
  app.add_option("--dt", dt, "override the solver step size");
  app.add_option("--n", n_override, "override the spatial grid size");
  app.add_option("--r-plus-omega", r_plus_omega, "pde-heat: set r = omega = value/2");
  app.add_option("--rho", rho, "pde-ks: override the anti-diffusion parameter");

  auto* sim = app.add_subcommand("simulate", "run the configured ensemble and write CSVs");
  auto* cls = app.add_subcommand("classify", "classify the stability of the evolution family");
  auto* cert = app.add_subcommand("certify", "build certificates and verify the estimates");
  auto* repr = app.add_subcommand("reproduce", "run a pinned example end to end");
  std::string example;
  repr->add_option("example", example, "appendix | ks | heat")->required();

  CLI11_PARSE(app, argc, argv);

  ov.out_dir = out_dir;
  ov.seed = seed;
  if (dt > 0.0) ov.dt = dt;
  if (n_override > 0) ov.n = n_override;
  if (r_plus_omega > 0.0) ov.r_plus_omega = r_plus_omega;
  if (rho != 0.0) ov.rho = rho;

  try {
    if (repr->parsed()) return cmd_reproduce(example, out_dir, seed);
    const ExperimentConfig cfg = resolve_config(config_path, preset, ov);
    if (sim->parsed()) return cmd_simulate(cfg, fail_on_escape);
    if (cls->parsed()) return cmd_classify(cfg);
    if (cert->parsed()) return cmd_certify(cfg);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const NotApplicableError& e) {
    std::cerr << "not applicable: " << e.what() << "\n";
    return kExitNotApplicable;
  } catch (const Error& e) {
    std::cerr << "solver error: " << e.what() << "\n";
    return kExitSolver;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitSolver;
  }
  return kExitOk;
}
