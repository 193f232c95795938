#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "config.hpp"

namespace evolyap::tools {

// Exit codes shared by all subcommands.
inline constexpr int kExitOk = 0;
inline constexpr int kExitCheckFailed = 1;  // a reproduction check came out red
inline constexpr int kExitEscape = 2;
inline constexpr int kExitConfig = 3;
inline constexpr int kExitSolver = 4;
inline constexpr int kExitNotApplicable = 5;

struct CliOverrides {
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<double> dt;
  std::optional<int> n;
  std::optional<double> r_plus_omega;  // pde-heat: sets r = omega = value / 2
  std::optional<double> rho;           // pde-ks anti-diffusion override
};

// Loads --config PATH or the named --system preset and applies overrides.
ExperimentConfig resolve_config(const std::optional<std::string>& config_path,
                                const std::optional<std::string>& preset,
                                const CliOverrides& overrides);

int cmd_simulate(const ExperimentConfig& config, bool fail_on_escape);
int cmd_classify(const ExperimentConfig& config);
int cmd_certify(const ExperimentConfig& config);
int cmd_reproduce(const std::string& example, const std::string& out_dir, std::uint64_t seed);

}  // namespace evolyap::tools
