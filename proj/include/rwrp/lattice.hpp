#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace rwrp {

// A point of Z^d.
using Site = Eigen::VectorXi;
using SiteIndex = std::int32_t;

inline constexpr SiteIndex kKilled = -1;

// The box Z^d ∩ [-N,N]^d with a row-major index (axis e_1 slowest).
// Immutable and cheap to copy.
class BoxGeometry {
 public:
  BoxGeometry(int dimension, int radius);

  int dimension() const { return dimension_; }
  int radius() const { return radius_; }
  int side() const { return 2 * radius_ + 1; }
  SiteIndex site_count() const { return site_count_; }
  SiteIndex stride(int axis) const { return strides_[static_cast<std::size_t>(axis)]; }

  bool contains(const Site& site) const;
  SiteIndex index(const Site& site) const;
  Site site(SiteIndex index) const;
  int coordinate(SiteIndex index, int axis) const;
  SiteIndex origin() const;

  // Neighbor across direction k in the fixed order +e_1, -e_1, ..., +e_d, -e_d.
  SiteIndex neighbor(SiteIndex index, int direction) const;
  int neighbor_count() const { return 2 * dimension_; }

  // The 2d neighbors of a site in fixed order; std::nullopt marks KILLED.
  std::vector<std::optional<Site>> neighbors(const Site& site) const;

  std::string describe() const;

  friend bool operator==(const BoxGeometry& a, const BoxGeometry& b) {
    return a.dimension_ == b.dimension_ && a.radius_ == b.radius_;
  }

 private:
  int dimension_;
  int radius_;
  SiteIndex site_count_;
  std::vector<SiteIndex> strides_;
};

BoxGeometry build_box(int dimension, int radius);

int l1_norm(const Site& site);
int linf_norm(const Site& site);

// Site built from a coordinate list, e.g. make_site({1, -2}).
Site make_site(std::initializer_list<int> coords);
Site unit_vector(int dimension, int axis, int sign = 1);
std::string format_site(const Site& site);

// Visits every site in index order with its coordinates (odometer walk).
template <typename Fn>
void for_each_site(const BoxGeometry& box, Fn&& fn) {
  const int d = box.dimension();
  const int n = box.radius();
  Site x = Site::Constant(d, -n);
  for (SiteIndex i = 0; i < box.site_count(); ++i) {
    fn(i, static_cast<const Site&>(x));
    for (int a = d - 1; a >= 0; --a) {
      if (x[a] < n) {
        ++x[a];
        break;
      }
      x[a] = -n;
    }
  }
}

}  // namespace rwrp
