#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "rwrp/errors.hpp"
#include "rwrp/lyapunov.hpp"

using namespace rwrp;

namespace {

ExponentConfig config(Estimator e, std::vector<int> ns, std::int64_t reps = 40) {
  ExponentConfig c;
  c.estimator = e;
  c.n_list = std::move(ns);
  c.replicates = reps;
  c.seed = 17;
  return c;
}

// a(0,n) in d=1 for omega = 1 everywhere, from the ratio recursion.
double recursion_cost(int N, int n, double lambda) {
  const double half_c = 0.5 * std::exp(-(1.0 + lambda));
  double rho = 0.0, cost = 0.0;
  for (int k = -N; k < n; ++k) {
    rho = half_c / (1.0 - half_c * rho);
    if (k >= 0) cost -= std::log(rho);
  }
  return cost;
}

}  // namespace

TEST_CASE("box rule parsing") {
  const BoxRule r = BoxRule::parse("3n+2");
  CHECK(r.scale == 3);
  CHECK(r.offset == 2);
  CHECK(r.radius(4, make_site({1, -2})) == 26);
  CHECK(BoxRule{}.str() == "2n+5");
  CHECK_THROWS_AS(BoxRule::parse("n^2"), ValidationError);
}

TEST_CASE("zero direction gives zero") {
  const auto pt = estimate_quenched_lyapunov(2, 0.5, 0.0, make_site({0, 0}), config(Estimator::EnvMc, {2}));
  CHECK(pt.extrapolated == 0.0);
  CHECK(estimate_annealed_lyapunov(1, 0.5, 0.0, make_site({0}), config(Estimator::PathMc, {2})).extrapolated == 0.0);
}

TEST_CASE("r=0 in d=1 reproduces the deterministic recursion") {
  const ExponentConfig cfg = config(Estimator::EnvMc, {2, 4, 8}, 3);
  const auto pt = estimate_quenched_lyapunov(1, 0.0, 0.3, make_site({1}), cfg);
  REQUIRE(pt.entries.size() == 3);
  for (const auto& e : pt.entries) {
    CHECK(e.value == doctest::Approx(recursion_cost(e.radius, e.n, 0.3) / e.n).epsilon(1e-9));
    CHECK(e.std_error == 0.0);
  }
  CHECK(pt.extrapolated == doctest::Approx(pt.entries.back().value));
}

TEST_CASE("non-primitive directions and bad schedules are rejected") {
  CHECK_THROWS_AS(estimate_quenched_lyapunov(2, 0.5, 0.0, make_site({2, 0}), config(Estimator::EnvMc, {2})),
                  ValidationError);
  CHECK_THROWS_AS(estimate_quenched_lyapunov(1, 0.5, 0.0, make_site({1}), config(Estimator::EnvMc, {4, 2})),
                  ValidationError);
  ExponentConfig small = config(Estimator::EnvMc, {4});
  small.box_rule = BoxRule{0, 1};
  CHECK_THROWS_AS(estimate_quenched_lyapunov(1, 0.5, 0.0, make_site({1}), small), ValidationError);
  CHECK(is_primitive(make_site({2, 3})));
  CHECK_FALSE(is_primitive(make_site({2, 4})));
}

TEST_CASE("annealed is below quenched on exact d=1 enumerations") {
  ExponentConfig cfg = config(Estimator::Exact, {1, 2});
  cfg.box_rule = BoxRule{1, 3};
  for (double r : {0.3, 0.7}) {
    const auto a = estimate_quenched_lyapunov(1, r, 0.0, make_site({1}), cfg);
    const auto b = estimate_annealed_lyapunov(1, r, 0.0, make_site({1}), cfg);
    for (std::size_t i = 0; i < a.entries.size(); ++i) CHECK(b.entries[i].value <= a.entries[i].value + 1e-12);
  }
}

TEST_CASE("extrapolation is the running minimum and respects the crude envelope") {
  const ExponentConfig cfg = config(Estimator::EnvMc, {1, 2, 4}, 30);
  const auto pt = estimate_quenched_lyapunov(2, 0.5, 0.5, make_site({1, 0}), cfg);
  double lo = 1e9;
  for (const auto& e : pt.entries) lo = std::min(lo, e.value);
  CHECK(pt.extrapolated == lo);
  CHECK(pt.extrapolated > 0.0);
  CHECK(pt.extrapolated <= 1.0 + 0.5 + std::log(4.0));
  CHECK(pt.extrapolation_method == "running-min");
}

TEST_CASE("exponents increase with lambda and are symmetric under reflection") {
  const ExponentConfig cfg = config(Estimator::EnvMc, {2}, 30);
  double prev = 0.0;
  for (double lambda : {0.0, 0.5, 1.0, 2.0}) {
    const double v = estimate_quenched_lyapunov(2, 0.5, lambda, make_site({1, 0}), cfg).extrapolated;
    CHECK(v > prev);
    prev = v;
  }
  const auto a = estimate_quenched_lyapunov(2, 0.5, 0.0, make_site({1, 0}), cfg);
  const auto b = estimate_quenched_lyapunov(2, 0.5, 0.0, make_site({-1, 0}), cfg);
  const auto c = estimate_quenched_lyapunov(2, 0.5, 0.0, make_site({0, 1}), cfg);
  CHECK(std::abs(a.extrapolated - b.extrapolated) <= 3 * std::hypot(a.extrapolated_se, b.extrapolated_se));
  CHECK(std::abs(a.extrapolated - c.extrapolated) <= 3 * std::hypot(a.extrapolated_se, c.extrapolated_se));
}

TEST_CASE("coupled costs are pointwise ordered in r") {
  const ExponentConfig cfg = config(Estimator::EnvMc, {2}, 50);
  const double rs[] = {0.2, 0.4, 0.6, 0.8};
  const auto c = coupled_costs(ExponentKind::Quenched, BoxGeometry(2, 4), make_site({2, 0}), 0.0, rs, cfg);
  for (int i = 1; i < 4; ++i) CHECK(c.value[i] <= c.value[i - 1]);
  CHECK(c.diff_std_error(0, 1) < std::hypot(c.std_error[0], c.std_error[1]));
  ExponentConfig path = cfg;
  path.estimator = Estimator::PathMc;
  CHECK_THROWS_AS(coupled_costs(ExponentKind::Quenched, BoxGeometry(2, 4), make_site({2, 0}), 0.0, rs, path),
                  ValidationError);
}

TEST_CASE("difference profiles") {
  const ExponentConfig cfg = config(Estimator::EnvMc, {1, 2}, 40);
  const Site dirs[] = {make_site({1, 0})};
  const ExponentKind kinds[] = {ExponentKind::Quenched, ExponentKind::Annealed};
  for (const auto& row : lyapunov_difference_profile(2, 0.5, 0.5, 0.0, dirs, cfg, kinds)) {
    CHECK(row.measured == 0.0);
  }
  const double c_hat = (1 + std::log(4.0)) / -std::log(std::exp(-1.0) + (1 - std::exp(-1.0)) * 0.6);
  for (const auto& row : lyapunov_difference_profile(2, 0.3, 0.6, 0.0, dirs, cfg, kinds)) {
    if (row.kind == ExponentKind::Quenched) {
      CHECK(row.measured >= (1 - std::exp(-1.0)) * 0.3 - 3 * row.std_error);
    } else {
      CHECK(row.measured <= c_hat * std::log(2.0) + 3 * row.std_error);
    }
  }
  CHECK_THROWS_AS(lyapunov_difference_profile(2, 0.6, 0.3, 0.0, dirs, cfg, kinds), ValidationError);
}
