#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>

#include "rwrp/errors.hpp"
#include "rwrp/lattice.hpp"

using namespace rwrp;

TEST_CASE("index and site are inverse") {
  for (int d = 1; d <= 3; ++d) {
    const BoxGeometry box(d, 3);
    CHECK(box.site_count() == static_cast<SiteIndex>(std::pow(7, d)));
    for (SiteIndex i = 0; i < box.site_count(); ++i) CHECK(box.index(box.site(i)) == i);
  }
}

TEST_CASE("origin sits at the center and e1 is the slowest axis") {
  const BoxGeometry box(2, 2);
  CHECK(box.origin() == 12);
  CHECK(box.site(box.origin()) == make_site({0, 0}));
  CHECK(box.index(make_site({-2, -2})) == 0);
  CHECK(box.index(make_site({-2, -1})) == 1);
  CHECK(box.index(make_site({-1, -2})) == 5);
  CHECK(box.stride(0) == 5);
  CHECK(box.stride(1) == 1);
}

TEST_CASE("neighbors follow +e1, -e1, +e2, -e2 and boundary neighbors are killed") {
  const BoxGeometry box(2, 1);
  const SiteIndex o = box.origin();
  CHECK(box.site(box.neighbor(o, 0)) == make_site({1, 0}));
  CHECK(box.site(box.neighbor(o, 1)) == make_site({-1, 0}));
  CHECK(box.site(box.neighbor(o, 2)) == make_site({0, 1}));
  CHECK(box.site(box.neighbor(o, 3)) == make_site({0, -1}));
  const SiteIndex corner = box.index(make_site({1, 1}));
  CHECK(box.neighbor(corner, 0) == kKilled);
  CHECK(box.neighbor(corner, 2) == kKilled);
  const auto nb = box.neighbors(make_site({1, 1}));
  REQUIRE(nb.size() == 4);
  CHECK_FALSE(nb[0].has_value());
  CHECK(*nb[1] == make_site({0, 1}));
}

TEST_CASE("every interior site has 2d distinct neighbors at l1 distance 1") {
  const BoxGeometry box(3, 2);
  for (SiteIndex i = 0; i < box.site_count(); ++i) {
    std::set<SiteIndex> seen;
    for (int k = 0; k < box.neighbor_count(); ++k) {
      const SiteIndex j = box.neighbor(i, k);
      if (j == kKilled) continue;
      CHECK(l1_norm(box.site(j) - box.site(i)) == 1);
      seen.insert(j);
    }
    if (linf_norm(box.site(i)) < 2) CHECK(seen.size() == 6);
  }
}

TEST_CASE("for_each_site walks in index order") {
  const BoxGeometry box(3, 1);
  SiteIndex expected = 0;
  for_each_site(box, [&](SiteIndex i, const Site& x) {
    CHECK(i == expected++);
    CHECK(box.site(i) == x);
  });
  CHECK(expected == box.site_count());
}

TEST_CASE("invalid boxes and sites are rejected") {
  CHECK_THROWS_AS(BoxGeometry(0, 1), ValidationError);
  CHECK_THROWS_AS(BoxGeometry(1, 0), ValidationError);
  CHECK_THROWS_AS(BoxGeometry(3, 2000), ValidationError);
  const BoxGeometry box(1, 2);
  CHECK_THROWS_AS(box.index(make_site({3})), ValidationError);
  CHECK_THROWS_AS(box.index(make_site({0, 0})), ValidationError);
  CHECK_FALSE(box.contains(make_site({-3})));
}

TEST_CASE("norms and formatting") {
  CHECK(l1_norm(make_site({2, -3})) == 5);
  CHECK(linf_norm(make_site({2, -3})) == 3);
  CHECK(format_site(make_site({1, 0})) == "(1,0)");
  CHECK(unit_vector(3, 1, -1) == make_site({0, -1, 0}));
}
