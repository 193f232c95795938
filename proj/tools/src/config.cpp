#include "config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

namespace evolyap::tools {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing characters");
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config: " + key + " is not a number: '" + v + "'");
  }
}

int to_int(const std::string& key, const std::string& v) {
  const double x = to_double(key, v);
  if (x != std::floor(x)) throw ConfigError("config: " + key + " must be an integer");
  return static_cast<int>(x);
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("config: " + key + " must be a boolean");
}

std::vector<double> to_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(to_double(key, item));
  }
  if (out.empty()) throw ConfigError("config: " + key + " must be a nonempty list");
  return out;
}

// Matrix literal: rows separated by ';', entries by ','.
Eigen::MatrixXd to_matrix(const std::string& key, const std::string& v) {
  std::vector<std::vector<double>> rows;
  std::stringstream ss(v);
  std::string row;
  while (std::getline(ss, row, ';')) {
    row = trim(row);
    if (row.empty()) continue;
    rows.push_back(to_list(key, row));
  }
  if (rows.empty()) throw ConfigError("config: " + key + " must be a matrix literal");
  const std::size_t cols = rows.front().size();
  Eigen::MatrixXd m(rows.size(), cols);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != cols)
      throw ConfigError("config: " + key + " has ragged rows");
    for (std::size_t j = 0; j < cols; ++j) m(i, j) = rows[i][j];
  }
  return m;
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text) {
  ExperimentConfig cfg;
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto comment = line.find('#');
    if (comment != std::string::npos) line = line.substr(0, comment);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError("config: malformed section header at line " + std::to_string(lineno));
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config: expected key = value at line " + std::to_string(lineno));
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const std::string qual = section + "." + key;

    auto& s = cfg.system;
    auto& i = cfg.input;
    auto& e = cfg.ensemble;
    auto& sv = cfg.solver;
    auto& cl = cfg.classify;
    auto& ce = cfg.certify;
    if (section == "system") {
      if (key == "kind") s.kind = value;
      else if (key == "dim") s.dim = to_int(qual, value);
      else if (key == "A" || key == "A0") s.A0 = to_matrix(qual, value);
      else if (key == "A1") s.A1 = to_matrix(qual, value);
      else if (key == "A2") s.A2 = to_matrix(qual, value);
      else if (key == "w1") s.w1 = to_double(qual, value);
      else if (key == "w2") s.w2 = to_double(qual, value);
      else if (key == "preset") s.preset = value;
      else if (key == "times") s.times = to_list(qual, value);
      else if (key == "values") s.values = to_list(qual, value);
      else if (key == "nu") s.nu = to_double(qual, value);
      else if (key == "ell") s.ell = to_double(qual, value);
      else if (key == "omega") s.omega = to_double(qual, value);
      else if (key == "r") s.r = to_double(qual, value);
      else if (key == "R_kind") s.R_kind = value;
      else if (key == "rho") s.rho = to_double(qual, value);
      else if (key == "mu") s.mu = to_double(qual, value);
      else if (key == "n") s.n = to_int(qual, value);
      else throw ConfigError("config: unknown key " + qual);
    } else if (section == "input") {
      if (key == "kind") i.kind = value;
      else if (key == "amplitude") i.amplitude = to_double(qual, value);
      else if (key == "frequency") i.frequency = to_double(qual, value);
      else if (key == "phase") i.phase = to_double(qual, value);
      else if (key == "slope") i.slope = to_double(qual, value);
      else if (key == "cap") i.cap = to_double(qual, value);
      else if (key == "t_start") i.t_start = to_double(qual, value);
      else if (key == "times") i.times = to_list(qual, value);
      else if (key == "values") i.values = to_list(qual, value);
      else if (key == "broadcast") i.broadcast = to_bool(qual, value);
      else throw ConfigError("config: unknown key " + qual);
    } else if (section == "ensemble") {
      if (key == "count") e.count = to_int(qual, value);
      else if (key == "x0_scales") e.x0_scales = to_list(qual, value);
      else if (key == "t0") e.t0 = to_double(qual, value);
      else throw ConfigError("config: unknown key " + qual);
    } else if (section == "solver") {
      if (key == "stepper") sv.stepper = value;
      else if (key == "dt") sv.dt = to_double(qual, value);
      else if (key == "t_end") sv.t_end = to_double(qual, value);
      else if (key == "blowup_cap") sv.blowup_cap = to_double(qual, value);
      else if (key == "record_dt") sv.record_dt = to_double(qual, value);
      else throw ConfigError("config: unknown key " + qual);
    } else if (section == "classify") {
      if (key == "t0_max") cl.t0_max = to_double(qual, value);
      else if (key == "t0_step") cl.t0_step = to_double(qual, value);
      else if (key == "horizon") cl.horizon = to_double(qual, value);
      else if (key == "T_step") cl.T_step = to_double(qual, value);
      else if (key == "sample_dt") cl.sample_dt = to_double(qual, value);
      else if (key == "eps") cl.eps = to_list(qual, value);
      else if (key == "lower_envelope") cl.lower_envelope = to_bool(qual, value);
      else if (key == "cap") cl.cap = to_double(qual, value);
      else if (key == "saturation_tol") cl.saturation_tol = to_double(qual, value);
      else throw ConfigError("config: unknown key " + qual);
    } else if (section == "certify") {
      if (key == "T_tail_factor") ce.T_tail_factor = to_double(qual, value);
      else if (key == "quad_dt") ce.quad_dt = to_double(qual, value);
      else if (key == "lie_h") ce.lie_h = to_double(qual, value);
      else if (key == "epsilon") ce.epsilon = to_double(qual, value);
      else if (key == "tol_rel") ce.tol_rel = to_double(qual, value);
      else if (key == "eta_fracs") ce.eta_fracs = to_list(qual, value);
      else if (key == "sample_points") ce.sample_points = to_int(qual, value);
      else throw ConfigError("config: unknown key " + qual);
    } else if (section == "ks") {
      // Shorthand for [system] kind = pde-ks.
      cfg.system.kind = "pde-ks";
      if (key == "rho") s.rho = to_double(qual, value);
      else if (key == "n") s.n = to_int(qual, value);
      else if (key == "mu") s.mu = to_double(qual, value);
      else throw ConfigError("config: unknown key " + qual);
    } else if (section == "heat") {
      // Shorthand for [system] kind = pde-heat.
      cfg.system.kind = "pde-heat";
      if (key == "nu") s.nu = to_double(qual, value);
      else if (key == "ell") s.ell = to_double(qual, value);
      else if (key == "omega") s.omega = to_double(qual, value);
      else if (key == "r") s.r = to_double(qual, value);
      else if (key == "n") s.n = to_int(qual, value);
      else if (key == "R_kind") s.R_kind = value;
      else throw ConfigError("config: unknown key " + qual);
    } else if (section == "output") {
      if (key == "dir") cfg.output.dir = value;
      else throw ConfigError("config: unknown key " + qual);
    } else if (section == "run") {
      if (key == "seed") cfg.seed = static_cast<std::uint64_t>(to_double(qual, value));
      else throw ConfigError("config: unknown key " + qual);
    } else {
      throw ConfigError("config: unknown section [" + section + "]");
    }
  }
  validate_config(cfg);
  return cfg;
}

ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

void validate_config(const ExperimentConfig& cfg) {
  const auto& s = cfg.system;
  static const std::vector<std::string> kinds{"matrix-constant", "matrix-timevarying",
                                              "matrix-timevarying-expr", "piecewise-scalar",
                                              "pde-heat", "pde-ks"};
  if (std::find(kinds.begin(), kinds.end(), s.kind) == kinds.end())
    throw ConfigError("config: system.kind must be one of matrix-constant | matrix-timevarying"
                      " | piecewise-scalar | pde-heat | pde-ks (got '" + s.kind + "')");
  if (s.kind == "matrix-constant" && s.A0.size() == 0)
    throw ConfigError("config: system.A is required for matrix-constant");
  if ((s.kind == "matrix-timevarying" || s.kind == "matrix-timevarying-expr") && s.A0.size() == 0)
    throw ConfigError("config: system.A0 is required for matrix-timevarying");
  if (s.kind == "piecewise-scalar" && s.preset.empty() && s.times.empty())
    throw ConfigError("config: system.preset or system.times/values required for piecewise-scalar");
  if ((s.kind == "pde-heat" || s.kind == "pde-ks") && s.n < 8)
    throw ConfigError("config: system.n must be at least 8");
  if (s.kind == "pde-heat" && !(s.nu > 0.0))
    throw ConfigError("config: system.nu must be positive");
  if (s.kind == "pde-heat" && !(s.ell > 0.0))
    throw ConfigError("config: system.ell must be positive");
  if (s.kind == "pde-heat" && s.R_kind != "cosine" && s.R_kind != "constant")
    throw ConfigError("config: system.R_kind must be cosine or constant");
  if (s.kind == "pde-ks" && s.mu < 0.0)
    throw ConfigError("config: system.mu must be nonnegative");

  static const std::vector<std::string> input_kinds{"zero", "const", "sine", "ramp",
                                                    "sample-grid"};
  if (std::find(input_kinds.begin(), input_kinds.end(), cfg.input.kind) == input_kinds.end())
    throw ConfigError("config: input.kind must be one of zero | const | sine | ramp | sample-grid");
  if (cfg.input.kind == "sample-grid" &&
      (cfg.input.times.empty() || cfg.input.times.size() != cfg.input.values.size()))
    throw ConfigError("config: input.times and input.values must be matching nonempty lists");

  if (cfg.ensemble.count < 0) throw ConfigError("config: ensemble.count must be nonnegative");

  if (!cfg.solver.stepper.empty() && cfg.solver.stepper != "exact" &&
      cfg.solver.stepper != "rk4" && cfg.solver.stepper != "implicit-euler")
    throw ConfigError("config: solver.stepper must be exact | rk4 | implicit-euler");
  if (!(cfg.solver.dt > 0.0)) throw ConfigError("config: solver.dt must be positive");
  if (!(cfg.solver.t_end > 0.0)) throw ConfigError("config: solver.t_end must be positive");
  if (!(cfg.solver.blowup_cap > 0.0))
    throw ConfigError("config: solver.blowup_cap must be positive");
  if (cfg.solver.record_dt < 0.0)
    throw ConfigError("config: solver.record_dt must be nonnegative");

  if (!(cfg.classify.t0_step > 0.0)) throw ConfigError("config: classify.t0_step must be positive");
  if (!(cfg.classify.T_step > 0.0)) throw ConfigError("config: classify.T_step must be positive");
  if (!(cfg.classify.horizon > 0.0)) throw ConfigError("config: classify.horizon must be positive");
  if (!(cfg.classify.sample_dt > 0.0))
    throw ConfigError("config: classify.sample_dt must be positive");
  for (double e : cfg.classify.eps)
    if (!(e > 0.0)) throw ConfigError("config: classify.eps entries must be positive");

  if (!(cfg.certify.T_tail_factor >= 5.0))
    throw ConfigError("config: certify.T_tail_factor must be at least 5");
  if (!(cfg.certify.quad_dt > 0.0)) throw ConfigError("config: certify.quad_dt must be positive");
  if (!(cfg.certify.lie_h > 0.0)) throw ConfigError("config: certify.lie_h must be positive");
  if (!(cfg.certify.epsilon > 0.0)) throw ConfigError("config: certify.epsilon must be positive");
  if (!(cfg.certify.tol_rel > 0.0)) throw ConfigError("config: certify.tol_rel must be positive");
  for (double f : cfg.certify.eta_fracs)
    if (!(f > 0.0 && f < 1.0))
      throw ConfigError("config: certify.eta_fracs entries must lie in (0,1)");
  if (cfg.certify.sample_points < 1)
    throw ConfigError("config: certify.sample_points must be positive");
}

}  // namespace evolyap::tools
