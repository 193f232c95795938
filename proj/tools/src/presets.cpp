#include "presets.hpp"

#include <map>
#include <stdexcept>

#include "evolyap/errors.hpp"

namespace evolyap::tools {

namespace {

const std::string kScalarDecay = R"(# scalar contraction x' = -x
[system]
kind = matrix-constant
A = -1

[input]
kind = zero

[ensemble]
count = 2
x0_scales = 1.0,2.0

[solver]
stepper = exact
dt = 0.01
t_end = 6.0
record_dt = 0.05

[classify]
t0_max = 10
t0_step = 0.5
horizon = 8
T_step = 0.05
)";

const std::string kAppendix = R"(# scalar family alternating strong decay with logarithmic growth;
# uniformly attractive but neither uniformly stable nor UBRS
[system]
kind = piecewise-scalar
preset = alternating-log

[input]
kind = zero

[ensemble]
count = 4
x0_scales = 1.0,2.0

[solver]
stepper = exact
dt = 0.01
t_end = 10.0
record_dt = 0.25

[classify]
t0_max = 9.5
t0_step = 0.5
horizon = 10
T_step = 0.5
sample_dt = 0.05
lower_envelope = false
)";

const std::string kHeat = R"(# controlled heat equation, distributed input, below the decay threshold
[system]
kind = pde-heat
nu = 1.0
ell = 1.0
omega = 2.5
r = 2.5
n = 128

[input]
kind = sine
amplitude = 0.5
frequency = 2.0
broadcast = true

[ensemble]
count = 20
x0_scales = 0.5,1.0,2.0

[solver]
stepper = exact
dt = 0.001
t_end = 3.0
record_dt = 0.05

[classify]
t0_max = 6.5
t0_step = 0.5
horizon = 3.0
T_step = 0.1
sample_dt = 0.05
lower_envelope = false

[certify]
epsilon = 0.1
lie_h = 1e-4
tol_rel = 1e-2
sample_points = 10
)";

const std::string kKS = R"(# fourth-order anti-diffusion example below its stability threshold
[system]
kind = pde-ks
rho = 30.0
n = 128
mu = 0.0

[input]
kind = sine
amplitude = 0.5
frequency = 3.0

[ensemble]
count = 20
x0_scales = 0.25,0.5,1.0

[solver]
stepper = implicit-euler
dt = 1e-4
t_end = 0.4
record_dt = 0.01

[classify]
t0_max = 0.5
t0_step = 0.05
horizon = 0.1
T_step = 0.005
sample_dt = 0.005
lower_envelope = false

[certify]
tol_rel = 1e-2
sample_points = 8
)";

const std::map<std::string, const std::string*>& registry() {
  static const std::map<std::string, const std::string*> presets{
      {"scalar-decay", &kScalarDecay},
      {"appendix", &kAppendix},
      {"heat", &kHeat},
      {"ks", &kKS},
  };
  return presets;
}

}  // namespace

const std::string& preset_config(const std::string& name) {
  const auto& presets = registry();
  auto it = presets.find(name);
  if (it == presets.end()) {
    std::string names;
    for (const auto& [n, cfg] : presets) names += (names.empty() ? "" : ", ") + n;
    throw ConfigError("unknown system preset '" + name + "' (available: " + names + ")");
  }
  return *it->second;
}

std::vector<std::string> preset_names() {
  std::vector<std::string> out;
  for (const auto& [n, cfg] : registry()) out.push_back(n);
  return out;
}

}  // namespace evolyap::tools
