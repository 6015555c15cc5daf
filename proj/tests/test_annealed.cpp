#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "rwrp/annealed.hpp"
#include "rwrp/errors.hpp"
#include "rwrp/numerics.hpp"

using namespace rwrp;

namespace {

const double e1 = std::exp(-1.0);

// The four d=1, N=1, y=1 environments over sites -1 and 0, hand-solved.
double four_environment_mean(double r) {
  const double u00 = 2.0 / 3.0;                   // omega(-1)=0, omega(0)=0
  const double u10 = 0.5 / (1 - e1 / 4);          // omega(-1)=1
  const double u01 = (e1 / 2) / (1 - e1 / 4);     // omega(0)=1
  const double u11 = (e1 / 2) / (1 - e1 * e1 / 4);
  return r * r * u00 + r * (1 - r) * (u10 + u01) + (1 - r) * (1 - r) * u11;
}

AnnealedOptions mc(std::int64_t reps, std::uint64_t seed) {
  AnnealedOptions o;
  o.replicates = reps;
  o.seed = seed;
  return o;
}

}  // namespace

TEST_CASE("exact annealed cost on the smallest box") {
  const BoxGeometry box(1, 1);
  const Site y = make_site({1});
  CHECK(annealed_cost_exact(box, 1.0, y).value == doctest::Approx(std::log(1.5)).epsilon(1e-12));
  const double a = std::exp(-1.0) / 2;
  CHECK(annealed_cost_exact(box, 0.0, y).value == doctest::Approx(-std::log(a / (1 - a * a))).epsilon(1e-12));
  for (double r : {0.0, 0.25, 0.5, 0.9}) {
    const CostEstimate c = annealed_cost_exact(box, r, y);
    CHECK(c.value == doctest::Approx(-std::log(four_environment_mean(r))).epsilon(1e-12));
    CHECK(c.std_error == 0.0);
    CHECK(c.estimator == Estimator::Exact);
  }
  CHECK(annealed_cost_exact(box, 0.5, y).value == doctest::Approx(0.9099).epsilon(1e-4));
}

TEST_CASE("environment MC at r=1 is exact and deterministic") {
  const BoxGeometry box(1, 2);
  const Site y = make_site({2});
  const CostEstimate a = annealed_cost_env_mc(box, 1.0, y, 0.0, mc(50, 1));
  CHECK(a.value == doctest::Approx(annealed_cost_exact(box, 1.0, y).value).epsilon(1e-12));
  CHECK(a.std_error == 0.0);
  const CostEstimate b = annealed_cost_env_mc(box, 0.5, y, 0.0, mc(500, 9));
  const CostEstimate c = annealed_cost_env_mc(box, 0.5, y, 0.0, mc(500, 9));
  CHECK(b.value == c.value);
  CHECK(b.std_error == c.std_error);
}

TEST_CASE("path MC at r=1 estimates the hitting probability") {
  const BoxGeometry box(2, 2);
  const Site y = make_site({1, 1});
  const CostEstimate p = annealed_cost_path_mc(box, 1.0, y, 0.0, mc(40000, 4));
  const double exact = quenched_cost(Environment::constant(box, 0), box.origin(), box.index(y));
  CHECK(std::abs(p.value - exact) <= 3 * p.std_error);
}

TEST_CASE("estimators agree with enumeration") {
  const BoxGeometry box(1, 2);
  const Site y = make_site({2});
  const double exact = annealed_cost_exact(box, 0.5, y).value;
  const CostEstimate env = annealed_cost_env_mc(box, 0.5, y, 0.0, mc(20000, 5));
  const CostEstimate path = annealed_cost_path_mc(box, 0.5, y, 0.0, mc(20000, 6));
  CHECK(std::abs(env.value - exact) <= 3.5 * env.std_error);
  CHECK(std::abs(path.value - exact) <= 3.5 * path.std_error);
  CHECK(path.estimator == Estimator::PathMc);
}

TEST_CASE("y = 0 has zero cost and variance") {
  const BoxGeometry box(2, 2);
  for (auto e : {Estimator::Exact, Estimator::EnvMc, Estimator::PathMc}) {
    const CostEstimate c = annealed_cost(e, box, 0.5, make_site({0, 0}), 0.0, mc(10, 1));
    CHECK(c.value == 0.0);
    CHECK(c.std_error == 0.0);
  }
}

TEST_CASE("walk samples satisfy local-time invariants") {
  const BoxGeometry box(2, 3);
  const SiteIndex target = box.index(make_site({2, 0}));
  std::mt19937_64 rng(12);
  int hits = 0;
  for (int i = 0; i < 2000; ++i) {
    const PathSample s = simulate_walk(box, box.origin(), target, rng, default_step_cap(box));
    if (!s.hit) continue;
    ++hits;
    std::int64_t total = 0;
    for (const auto& [site, l] : s.local_times) {
      CHECK(site != target);
      CHECK(l > 0);
      total += l;
    }
    CHECK(total == s.steps);
    CHECK(total >= 2);
    CHECK(s.local_times.front().first == box.origin());
  }
  CHECK(hits > 0);
  CHECK(default_step_cap(BoxGeometry(1, 1)) == 64 * 9);
}

TEST_CASE("path weight and its log-derivative") {
  PathSample s;
  s.hit = true;
  s.local_times = {{0, 2}, {1, 1}};
  s.steps = 3;
  const double r = 0.4;
  const auto w = [&](double rr) { return (rr + (1 - rr) * std::exp(-2.0)) * (rr + (1 - rr) * e1); };
  CHECK(path_weight(s, r) == doctest::Approx(w(r)));
  CHECK(path_weight(s, r, 0.5) == doctest::Approx(w(r) * std::exp(-1.5)));
  const double h = 1e-6;
  CHECK(path_log_derivative(s, r) * w(r) == doctest::Approx((w(r + h) - w(r - h)) / (2 * h)).epsilon(1e-7));
  s.hit = false;
  CHECK(path_weight(s, r) == 0.0);
}

TEST_CASE("flip derivative matches finite differences and is nonnegative") {
  const BoxGeometry box(1, 1);
  const Site y = make_site({1});
  const CostTable t = tabulate_costs(box, y);
  for (double r = 0.05; r < 1.0; r += 0.1) {
    const double flip = annealed_derivative_from_table(t, r);
    CHECK(flip >= 0.0);
    CHECK(flip == doctest::Approx(annealed_fd_from_table(t, r, 1e-4)).epsilon(1e-6));
    CHECK(flip == doctest::Approx(annealed_fd_from_table(t, r, 1e-3, true)).epsilon(1e-8));
    const double m = four_environment_mean(r);
    const double h = 1e-6;
    const double analytic = -(four_environment_mean(r + h) - four_environment_mean(r - h)) / (2 * h) / m;
    CHECK(flip == doctest::Approx(-analytic).epsilon(1e-6));
  }
  CHECK(annealed_derivative_flip(box, 0.5, y) == doctest::Approx(annealed_derivative_from_table(t, 0.5)));
}

TEST_CASE("path formula derivative agrees with the flip form and the paper's envelope") {
  const BoxGeometry box(1, 2);
  const Site y = make_site({2});
  for (double r : {0.2, 0.5, 0.8}) {
    const Estimate f = annealed_derivative_formula(box, r, y, 0.0, mc(40000, 21));
    const double flip = annealed_derivative_flip(box, r, y);
    CHECK(std::abs(f.value - flip) <= 3.5 * f.std_error);
    CHECK(f.value >= kOneMinusInvE * 2 - 3 * f.std_error);
    CHECK(flip <= range_constant(1, r) * 2 / r);
  }
}

TEST_CASE("derivative report fills every column") {
  const BoxGeometry box(1, 1);
  DerivativeOptions o;
  o.annealed = mc(5000, 2);
  const DerivativeReport rep = derivative_report(box, 0.5, make_site({1}), o);
  REQUIRE(rep.flip_value);
  REQUIRE(rep.fd_value);
  CHECK(rep.abs_disc >= std::abs(*rep.flip_value - *rep.fd_value));
  CHECK_THROWS_AS(derivative_report(box, 1.0, make_site({1}), o), ValidationError);
}

TEST_CASE("annealed cost is decreasing in r, below the mean quenched cost, and spreads by the lower bound") {
  const BoxGeometry box(2, 1);
  const Site y = make_site({1, 0});
  const CostTable t = tabulate_costs(box, y);
  double prev = 1e9;
  for (double r = 0.05; r < 1.0; r += 0.05) {
    const double b = annealed_cost_from_table(t, r);
    CHECK(b < prev);
    CHECK(b <= t.expected_cost(r) + 1e-12);
    prev = b;
  }
  for (double p = 0.1; p < 0.95; p += 0.2) {
    for (double q = p + 0.1; q < 0.95; q += 0.2) {
      CHECK(annealed_cost_from_table(t, p) - annealed_cost_from_table(t, q) >= kOneMinusInvE * (q - p) - 1e-12);
    }
  }
}

TEST_CASE("bad inputs are rejected") {
  const BoxGeometry box(1, 2);
  CHECK_THROWS_AS(annealed_cost_env_mc(box, 0.5, make_site({2}), 0.0, mc(1, 0)), ValidationError);
  CHECK_THROWS_AS(annealed_cost_exact(box, 1.2, make_site({2})), ValidationError);
  CHECK_THROWS_AS(annealed_derivative_formula(box, 0.0, make_site({2}), 0.0, mc(10, 0)), ValidationError);
  AnnealedOptions tiny = mc(10, 0);
  tiny.guard = 2;
  CHECK_THROWS_AS(annealed_cost_exact(BoxGeometry(2, 2), 0.5, make_site({1, 0}), 0.0, tiny), GuardError);
}

TEST_CASE("path MC with no hits is an error") {
  AnnealedOptions o = mc(20, 0);
  o.step_cap = 1;
  CHECK_THROWS_AS(annealed_cost_path_mc(BoxGeometry(1, 5), 0.5, make_site({4}), 0.0, o), NumericalError);
}
