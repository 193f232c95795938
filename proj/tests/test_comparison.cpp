#include "evolyap/comparison.hpp"

#include <cmath>
#include <random>

#include "doctest.h"
#include "evolyap/signals.hpp"

using namespace evolyap;

namespace {

// Fine-step RK4 oracle for omega' = -theta(omega), independent of the library
// integrator (no clipping, no lattice alignment).
double decay_ode_oracle(const std::function<double(double)>& theta, double omega0, double t_end,
                        double dt) {
  double w = omega0, t = 0.0;
  while (t < t_end - 1e-15) {
    const double h = std::min(dt, t_end - t);
    auto f = [&](double s) { return -theta(std::max(s, 0.0)); };
    const double k1 = f(w);
    const double k2 = f(w + 0.5 * h * k1);
    const double k3 = f(w + 0.5 * h * k2);
    const double k4 = f(w + h * k3);
    w += h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
    t += h;
  }
  return w;
}

// Random strictly increasing class-K interpolant through ~6 nodes.
ComparisonFunction random_k_interpolant(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(0.05, 1.0);
  std::vector<double> xs{0.0}, ys{0.0};
  double x = 0.0, y = 0.0;
  for (int i = 0; i < 6; ++i) {
    x += unif(rng);
    y += unif(rng);
    xs.push_back(x);
    ys.push_back(y);
  }
  return ComparisonFunction::piecewise_linear(FunctionClass::Kinf, xs, ys, unif(rng));
}

}  // namespace

TEST_CASE("monotone_inverse on closed forms and interpolants") {
  auto square = ComparisonFunction::power(2.0);
  CHECK(monotone_inverse(square, 4.0) == doctest::Approx(2.0).epsilon(1e-10));

  auto id = ComparisonFunction::identity();
  CHECK(monotone_inverse(id, 0.0) == 0.0);

  auto pl = ComparisonFunction::piecewise_linear(FunctionClass::K, {0.0, 1.0, 2.0},
                                                 {0.0, 3.0, 5.0});
  CHECK(monotone_inverse(pl, 4.0) == doctest::Approx(1.5).epsilon(1e-14));
  CHECK_THROWS_AS(monotone_inverse(pl, 6.0), OutOfRangeError);
}

TEST_CASE("monotone_inverse is the identity on interpolant nodes") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    auto f = random_k_interpolant(rng);
    for (double x : f.nodes()) {
      CHECK(monotone_inverse(f, f(x)) == doctest::Approx(x).epsilon(1e-12));
    }
  }
}

TEST_CASE("comparison_integrate matches the linear closed form") {
  auto id = ComparisonFunction::identity();
  const auto bound = comparison_integrate(id, 1.0, InputSignal::zero(), 0.0, 5.0, 1e-3);
  for (double t : {1.0, 2.0, 5.0}) {
    CHECK(bound.at(t) == doctest::Approx(std::exp(-t)).epsilon(1e-6));
  }
}

TEST_CASE("comparison_integrate fixes the origin") {
  auto theta = ComparisonFunction::power(1.5);
  const auto bound = comparison_integrate(theta, 0.0, InputSignal::zero(), 0.0, 3.0, 1e-2);
  for (double v : bound.value) CHECK(v == 0.0);
}

TEST_CASE("comparison_integrate quadratic decay against closed form and fine-step oracle") {
  auto sq = ComparisonFunction::power(2.0);
  const auto bound = comparison_integrate(sq, 1.0, InputSignal::zero(), 0.0, 1.0, 1e-3);
  // Closed form 1/(1+t); cross-checked with the independent fine-step oracle.
  const double closed = 0.5;
  const double oracle = decay_ode_oracle([](double s) { return s * s; }, 1.0, 1.0, 1e-4);
  CHECK(oracle == doctest::Approx(closed).epsilon(1e-8));
  CHECK(bound.at(1.0) == doctest::Approx(closed).epsilon(1e-6));
}

TEST_CASE("comparison_integrate is nonincreasing without input") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> w0(0.0, 5.0);
  for (int trial = 0; trial < 100; ++trial) {
    auto theta = random_k_interpolant(rng);
    const auto bound = comparison_integrate(theta, w0(rng), InputSignal::zero(), 0.0, 4.0, 1e-2);
    for (std::size_t i = 1; i < bound.value.size(); ++i) {
      CHECK(bound.value[i] <= bound.value[i - 1] + 1e-15);
      CHECK(bound.value[i] >= 0.0);
    }
  }
}

TEST_CASE("comparison_integrate overflows loudly") {
  // Valid class-P function whose evaluation overflows at large arguments.
  auto steep = ComparisonFunction::custom(
      FunctionClass::P, [](double s) { return s * std::exp(std::min(s, 700.0)); });
  CHECK_THROWS_AS(comparison_integrate(steep, 1e5, InputSignal::zero(), 0.0, 1.0, 1e-2),
                  NonFiniteError);
}

TEST_CASE("fit_kl_envelope recovers the scalar exponential") {
  std::vector<ZeroInputRun> runs;
  for (double x0 : {1.0, 2.0}) {
    ZeroInputRun run;
    run.t0 = 0.0;
    run.x0_norm = x0;
    for (double t = 0.0; t <= 6.0; t += 0.25) {
      run.tau.push_back(t);
      run.norm.push_back(x0 * std::exp(-t));  // exact solution oracle
    }
    runs.push_back(run);
  }
  const auto beta = fit_kl_envelope(runs);
  CHECK(beta.kl_scale() == doctest::Approx(1.0).epsilon(0.02));
  CHECK(beta.kl_rate() == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("fit_kl_envelope defaults on the zero trajectory") {
  ZeroInputRun run;
  run.t0 = 0.0;
  run.x0_norm = 1.0;
  for (double t = 0.0; t <= 3.0; t += 0.5) {
    run.tau.push_back(t);
    run.norm.push_back(0.0);
  }
  const auto beta = fit_kl_envelope(std::vector<ZeroInputRun>{run});
  CHECK(beta.kl_scale() == 1.0);
  CHECK(beta.kl_rate() == 1.0);
}

TEST_CASE("fit_kl_envelope rejects growth spikes that scale with the start time") {
  // Norm histories of the alternating-log scalar family started at half
  // integers and sampled at integer absolute times: the first sample jumps to
  // (k+1) |x0|, so the required constant grows with t0.
  std::vector<ZeroInputRun> runs;
  for (int k = 0; k <= 9; ++k) {
    ZeroInputRun run;
    run.t0 = k + 0.5;
    run.x0_norm = (k % 2 == 0) ? 1.0 : 2.0;
    double w = run.x0_norm * (k + 1.0);  // |W(k+1, k+1/2)| = k+1
    run.tau.push_back(0.5);
    run.norm.push_back(w);
    w *= 1.0 / (2.0 * (k + 2.0));  // decay piece of the next unit interval
    run.tau.push_back(1.5);
    run.norm.push_back(w * (k + 2.0));
    runs.push_back(run);
  }
  CHECK_THROWS_AS(fit_kl_envelope(runs), NotUniformlyStableError);
}

TEST_CASE("fitted KL surfaces are monotone and vanish at zero") {
  auto beta = ComparisonFunction::exponential_kl(2.0, 0.7);
  for (double t : {0.0, 0.5, 2.0, 8.0}) {
    CHECK(beta(0.0, t) == 0.0);
    double prev = 0.0;
    for (double r : {0.1, 0.5, 1.0, 3.0}) {
      CHECK(beta(r, t) > prev);
      prev = beta(r, t);
    }
  }
  for (double r : {0.5, 1.0, 3.0}) {
    double prev = beta(r, 0.0);
    for (double t : {0.5, 1.0, 4.0, 16.0}) {
      CHECK(beta(r, t) < prev);
      prev = beta(r, t);
    }
  }
}

TEST_CASE("class validation rejects malformed functions") {
  CHECK_THROWS_AS(ComparisonFunction::custom(FunctionClass::K, [](double) { return 1.0; }),
                  std::invalid_argument);
  CHECK_THROWS_AS(ComparisonFunction::custom(FunctionClass::L, [](double r) { return r; }),
                  std::invalid_argument);
  CHECK_THROWS_AS(ComparisonFunction::piecewise_linear(FunctionClass::K, {0.0, 1.0, 2.0},
                                                       {0.0, 2.0, 1.0}),
                  std::invalid_argument);
}
