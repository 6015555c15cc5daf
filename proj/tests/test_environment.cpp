#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "rwrp/environment.hpp"
#include "rwrp/errors.hpp"
#include "rwrp/numerics.hpp"

using namespace rwrp;

TEST_CASE("sampling is a deterministic function of the seed") {
  const BoxGeometry box(2, 4);
  CHECK(sample_environment(box, 0.5, 11) == sample_environment(box, 0.5, 11));
  CHECK_FALSE(sample_environment(box, 0.5, 11) == sample_environment(box, 0.5, 12));
}

TEST_CASE("degenerate r gives constant environments") {
  const BoxGeometry box(2, 3);
  CHECK(sample_environment(box, 1.0, 5) == Environment::constant(box, 0));
  CHECK(sample_environment(box, 0.0, 5) == Environment::constant(box, 1));
}

TEST_CASE("site values agree across box radii") {
  const Environment small = sample_environment(BoxGeometry(2, 3), 0.4, 9);
  const Environment big = sample_environment(BoxGeometry(2, 8), 0.4, 9);
  for_each_site(small.box(), [&](SiteIndex i, const Site& x) { CHECK(small[i] == big.at(x)); });
}

TEST_CASE("the fraction of ones stays in a binomial band") {
  const BoxGeometry box(2, 158);  // 317^2 > 1e5 sites
  const Environment env = sample_environment(box, 0.5, 2024);
  double ones = 0;
  for (auto v : env.values()) ones += v;
  const double n = box.site_count();
  CHECK(std::abs(ones / n - 0.5) <= 4.0 * std::sqrt(0.25 / n));
}

TEST_CASE("coupling is monotone in r") {
  const BoxGeometry box(2, 5);
  const Environment base = sample_environment(box, 0.3, 77);
  double prev_ones = 1e9;
  for (double r : {0.3, 0.5, 0.7, 0.9}) {
    const Environment e = couple(base, r);
    CHECK(e == sample_environment(box, r, 77));
    for (SiteIndex i = 0; i < box.site_count(); ++i) CHECK(e[i] <= base[i]);
    double ones = 0;
    for (auto v : e.values()) ones += v;
    CHECK(ones <= prev_ones);
    prev_ones = ones;
  }
  CHECK_THROWS_AS(couple(flip_site(base, SiteIndex{0}, 1), 0.5), ValidationError);
}

TEST_CASE("flips and toggles touch one site") {
  const BoxGeometry box(1, 2);
  const Environment e = Environment::constant(box, 0);
  const Environment f = toggle_site(e, 1);
  CHECK(f[1] == 1);
  CHECK(toggle_site(f, 1) == e);
  CHECK(flip_site(e, make_site({2}), 1)[4] == 1);
}

TEST_CASE("enumeration weights sum to one and masks map to values") {
  const BoxGeometry box(2, 1);
  const EnvironmentEnumerator en(box, sites_except(box, box.index(make_site({1, 0}))));
  CHECK(en.size() == 256);
  for (double r : {0.0, 0.2, 0.5, 1.0}) {
    double total = 0.0;
    for (std::uint64_t m = 0; m < en.size(); ++m) total += en.weight(m, r);
    CHECK(total == doctest::Approx(1.0).epsilon(1e-14));
  }
  const Environment e = en.environment(0b101);
  CHECK(e[en.relevant_sites()[0]] == 1);
  CHECK(e[en.relevant_sites()[1]] == 0);
  CHECK(e[en.relevant_sites()[2]] == 1);
  CHECK(en.weight(0b101, 0.25) == doctest::Approx(std::pow(0.25, 6) * std::pow(0.75, 2)));
}

TEST_CASE("the enumeration guard names the flag") {
  const BoxGeometry box(2, 3);
  try {
    EnvironmentEnumerator en(box, sites_except(box, 0), 10);
    FAIL("expected a guard error");
  } catch (const GuardError& e) {
    CHECK(std::string(e.what()).find("--enum-guard") != std::string::npos);
  }
}

TEST_CASE("reachable sites avoid passing through the target") {
  const BoxGeometry box(1, 3);
  const auto r = reachable_sites(box, box.origin(), box.index(make_site({1})));
  CHECK(r.size() == 4);  // -3..0
  for (SiteIndex s : r) CHECK(box.site(s)[0] <= 0);
  const BoxGeometry box2(2, 1);
  CHECK(reachable_sites(box2, box2.origin(), box2.index(make_site({1, 0}))).size() == 8);
}

TEST_CASE("environment files round-trip and are validated") {
  const Environment e = sample_environment(BoxGeometry(2, 2), 0.35, 4);
  std::stringstream ss;
  write_environment(ss, e);
  const Environment back = read_environment(ss);
  CHECK(back == e);
  REQUIRE(back.parameter_r());
  CHECK(*back.parameter_r() == 0.35);

  std::stringstream bad("2 2 0.35 4\n0 1\n");
  CHECK_THROWS_AS(read_environment(bad), ValidationError);
  std::stringstream plain("1 1 - -\n0 1\n1 0\n2 1\n");
  const Environment p = read_environment(plain);
  CHECK(p[0] == 1);
  CHECK(p[2] == 1);
}

TEST_CASE("r outside [0,1] is rejected") {
  CHECK_THROWS_AS(sample_environment(BoxGeometry(1, 1), 1.5, 0), ValidationError);
  CHECK_THROWS_AS(sample_environment(BoxGeometry(1, 1), -0.1, 0), ValidationError);
}

TEST_CASE("range constant matches its closed form") {
  CHECK(range_constant(2, 0.5) == doctest::Approx((1 + std::log(4.0)) / -std::log(std::exp(-1.0) + kOneMinusInvE * 0.5)));
  CHECK(range_constant(2, 0.0) == doctest::Approx(1 + std::log(4.0)).epsilon(1e-12));
}
