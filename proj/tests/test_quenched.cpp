#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include <Eigen/Dense>

#include "rwrp/errors.hpp"
#include "rwrp/quenched.hpp"

using namespace rwrp;

namespace {

// Dense solve of the killed system with u(y) = 1; returns u.
Eigen::VectorXd dense_travel(const Environment& env, SiteIndex y, double lambda) {
  const BoxGeometry& box = env.box();
  const int n = box.site_count();
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
  for (SiteIndex x = 0; x < n; ++x) {
    if (x == y) {
      b[x] = 1.0;
      continue;
    }
    const double c = std::exp(-(env[x] + lambda)) / box.neighbor_count();
    for (int k = 0; k < box.neighbor_count(); ++k) {
      const SiteIndex j = box.neighbor(x, k);
      if (j != kKilled) a(x, j) -= c;
    }
  }
  return a.partialPivLu().solve(b);
}

// a(0, n) in d = 1 from the ratio recursion rho_k = u(k)/u(k+1).
double recursion_cost(const Environment& env, int n, double lambda) {
  const BoxGeometry& box = env.box();
  const int N = box.radius();
  double rho = 0.0;
  double cost = 0.0;
  for (int k = -N; k < n; ++k) {
    const double half_c = 0.5 * std::exp(-(env.at(make_site({k})) + lambda));
    rho = half_c / (1.0 - half_c * rho);
    if (k >= 0) cost -= std::log(rho);
  }
  return cost;
}

Environment d1(std::initializer_list<int> values) {
  const int N = static_cast<int>(values.size() / 2);
  return Environment(BoxGeometry(1, N), std::vector<std::uint8_t>(values.begin(), values.end()));
}

}  // namespace

TEST_CASE("d=1 N=1 closed forms") {
  const Site y = make_site({1});
  const double e1 = std::exp(-1.0);
  CHECK(solve_travel_field(d1({0, 0, 0}), y).value(1) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(solve_travel_field(d1({1, 1, 1}), y).value(1) == doctest::Approx((e1 / 2) / (1 - e1 * e1 / 4)).epsilon(1e-12));
  // omega(0) = 1 only: u0 = (e^{-1}/2)(1 + u(-1)), u(-1) = u0/2.
  CHECK(solve_travel_field(d1({0, 1, 0}), y).value(1) == doctest::Approx((e1 / 2) / (1 - e1 / 4)).epsilon(1e-12));
  // omega(-1) = 1 only: u0 = (1 + u(-1))/2, u(-1) = (e^{-1}/2) u0.
  CHECK(solve_travel_field(d1({1, 0, 0}), y).value(1) == doctest::Approx(0.5 / (1 - e1 / 4)).epsilon(1e-12));
}

TEST_CASE("matches a dense direct solve on random environments") {
  const BoxGeometry box(2, 3);
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    for (double lambda : {0.0, 0.7}) {
      const Environment env = sample_environment(box, 0.5, seed);
      const SiteIndex y = box.index(make_site({2, -1}));
      const QuenchedField f = solve_travel_field(env, y, lambda);
      const Eigen::VectorXd u = dense_travel(env, y, lambda);
      for (SiteIndex x = 0; x < box.site_count(); ++x) CHECK(f.value(x) == doctest::Approx(u[x]).epsilon(1e-10));
    }
  }
}

TEST_CASE("matches the d=1 ratio recursion, including huge shifts") {
  const BoxGeometry box(1, 10);
  const Environment env = sample_environment(box, 0.4, 8);
  for (double lambda : {0.0, 1.0, 50.0, 200.0}) {
    const double want = recursion_cost(env, 8, lambda);
    const double got = quenched_cost(env, box.origin(), box.index(make_site({8})), lambda);
    CHECK(std::isfinite(got));
    CHECK(got == doctest::Approx(want).epsilon(1e-11));
  }
}

TEST_CASE("over-relaxation converges to the same field") {
  const BoxGeometry box(2, 4);
  const Environment env = sample_environment(box, 0.6, 5);
  SolverOptions sor;
  sor.relaxation = 1.5;
  const SiteIndex y = box.index(make_site({3, 0}));
  CHECK(quenched_cost(env, box.origin(), y, 0.0, sor) ==
        doctest::Approx(quenched_cost(env, box.origin(), y)).epsilon(1e-10));
}

TEST_CASE("non-convergence raises with the residual") {
  SolverOptions tight;
  tight.max_sweeps = 1;
  try {
    solve_travel_field(Environment::constant(BoxGeometry(2, 4), 0), make_site({3, 0}), 0.0, tight);
    FAIL("expected non-convergence");
  } catch (const ConvergenceError& e) {
    CHECK(e.iterations() == 1);
    CHECK(e.last_residual() > 0.0);
  }
}

TEST_CASE("y = start costs nothing") {
  const BoxGeometry box(2, 2);
  CHECK(quenched_cost(Environment::constant(box, 1), box.origin(), box.origin(), 3.0) == 0.0);
}

TEST_CASE("path-measure quantities on the smallest box") {
  const Environment zero = d1({0, 0, 0});
  const Site y = make_site({1});
  CHECK(hit_before_probability(zero, y, make_site({-1}), make_site({0})) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(expected_range(zero, y) == doctest::Approx(1.25).epsilon(1e-12));
  CHECK(return_weight_psi(zero, make_site({0})) == doctest::Approx(2.0).epsilon(1e-12));
  const auto flip = flip_log_ratio(zero, y, make_site({0}));
  const double e1 = std::exp(-1.0);
  CHECK(flip.omega_at_z == 0);
  CHECK(flip.log_ratio == doctest::Approx(std::log(((e1 / 2) / (1 - e1 / 4)) / (2.0 / 3.0))).epsilon(1e-12));
}

TEST_CASE("box-restricted psi in d=3 stays below the whole-lattice value") {
  const double psi_lattice = 1.0 / 0.6594626704;
  double prev = 0.0;
  for (int N : {2, 5, 10}) {
    const double psi = return_weight_psi(Environment::constant(BoxGeometry(3, N), 0), make_site({0, 0, 0}));
    CHECK(psi > prev);
    CHECK(psi <= psi_lattice);
    prev = psi;
  }
  CHECK(prev > 0.97 * psi_lattice);
}

TEST_CASE("hit-before probability agrees with direct walk simulation") {
  const BoxGeometry box(2, 2);
  const Environment env = sample_environment(box, 0.5, 31);
  const Site y = make_site({1, 1});
  const Site z = make_site({-1, 0});
  const double exact = hit_before_probability(env, y, z, make_site({0, 0}));
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> dir(0, 3);
  double num = 0.0, den = 0.0, num2 = 0.0;
  const int walks = 200000;
  for (int w = 0; w < walks; ++w) {
    SiteIndex x = box.origin();
    double log_weight = 0.0;
    bool seen_z = false;
    while (x != kKilled && x != box.index(y)) {
      if (x == box.index(z)) seen_z = true;
      log_weight -= env[x];
      x = box.neighbor(x, dir(rng));
    }
    if (x == kKilled) continue;
    const double wgt = std::exp(log_weight);
    den += wgt;
    if (seen_z) {
      num += wgt;
      num2 += wgt * wgt;
    }
  }
  const double est = num / den;
  const double se = std::sqrt(num2) / den;
  CHECK(std::abs(est - exact) <= 4.0 * se + 1e-3);
}

TEST_CASE("costs are monotone in the potential and the shift") {
  const BoxGeometry box(2, 3);
  const SiteIndex y = box.index(make_site({2, 1}));
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Environment env = sample_environment(box, 0.5, seed);
    const double base = quenched_cost(env, box.origin(), y);
    for (SiteIndex z = 0; z < box.site_count(); ++z) {
      if (env[z] == 1 || z == y) continue;
      CHECK(quenched_cost(flip_site(env, z, 1), box.origin(), y) >= base - 1e-12);
    }
    double prev = base;
    for (double lambda : {0.5, 1.0, 2.0}) {
      const double c = quenched_cost(env, box.origin(), y, lambda);
      CHECK(c > prev);
      CHECK(c >= lambda * 3);
      prev = c;
    }
    CHECK(base >= 0.0);
    CHECK(base <= 3 * (std::log(4.0) + 1.0));
  }
}

TEST_CASE("one-site flips obey the psi bound") {
  const BoxGeometry box(2, 3);
  const Site y = make_site({2, 0});
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const Environment env = sample_environment(box, 0.5, seed);
    const Environment big = sample_environment(BoxGeometry(2, 9), 0.5, seed);
    for (const Site& z : {make_site({0, 0}), make_site({1, 0}), make_site({-1, 1}), make_site({1, -1})}) {
      const FlipBoundRow row = flip_bound_row(env, big, y, z);
      CHECK(std::abs(row.report.log_ratio) <= row.bound_rhs * (1 + 1e-9));
      CHECK(row.hit_prob >= 0.0);
      CHECK(row.hit_prob <= 1.0);
    }
  }
}

TEST_CASE("expected range is at least the distance") {
  const BoxGeometry box(2, 4);
  const Site y = make_site({3, 0});
  for (std::uint64_t seed = 0; seed < 3; ++seed) CHECK(expected_range(sample_environment(box, 0.3, seed), y) >= 3.0 - 1e-9);
}

TEST_CASE("Russo sum equals the analytic derivative of the enumerated mean") {
  const BoxGeometry box(2, 1);
  const CostTable t = tabulate_costs(box, make_site({1, 0}));
  CHECK(t.enumerator.size() == 256);
  for (double r : {0.2, 0.5, 0.8}) {
    const double d = t.expected_cost_derivative(r);
    CHECK(-d == doctest::Approx(t.russo_sum(r)).epsilon(1e-12));
    const double h = 1e-5;
    CHECK(d == doctest::Approx((t.expected_cost(r + h) - t.expected_cost(r - h)) / (2 * h)).epsilon(1e-7));
  }
  RussoOptions mc;
  mc.estimator = Estimator::EnvMc;
  mc.replicates = 400;
  mc.seed = 3;
  const Estimate e = russo_rhs(box, 0.5, make_site({1, 0}), mc);
  CHECK(std::abs(e.value - t.russo_sum(0.5)) <= 4 * e.std_error);
}

TEST_CASE("pre-limit lower bound on the enumerated mean cost") {
  const BoxGeometry box(1, 2);
  const CostTable t = tabulate_costs(box, make_site({2}));
  for (double p = 0.1; p < 0.95; p += 0.1) {
    for (double q = p; q < 0.95; q += 0.1) {
      CHECK(t.expected_cost(p) - t.expected_cost(q) >= (1 - std::exp(-1.0)) * (q - p) * 2 - 1e-12);
    }
  }
}
