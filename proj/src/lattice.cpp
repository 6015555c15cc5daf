#include "rwrp/lattice.hpp"

#include <cstdlib>
#include <limits>
#include <sstream>

#include "rwrp/errors.hpp"

namespace rwrp {

BoxGeometry::BoxGeometry(int dimension, int radius) : dimension_(dimension), radius_(radius) {
  if (dimension < 1) throw ValidationError("box dimension must be >= 1, got " + std::to_string(dimension));
  if (radius < 1) throw ValidationError("box radius must be >= 1, got " + std::to_string(radius));
  const auto side_len = static_cast<std::int64_t>(2) * radius + 1;
  std::int64_t count = 1;
  for (int a = 0; a < dimension; ++a) {
    if (count > std::numeric_limits<SiteIndex>::max() / side_len) {
      throw ValidationError("site count (2*" + std::to_string(radius) + "+1)^" + std::to_string(dimension) +
                            " overflows the 32-bit site index range");
    }
    count *= side_len;
  }
  site_count_ = static_cast<SiteIndex>(count);
  strides_.assign(static_cast<std::size_t>(dimension), 1);
  for (int a = dimension - 2; a >= 0; --a) {
    strides_[static_cast<std::size_t>(a)] = strides_[static_cast<std::size_t>(a) + 1] * static_cast<SiteIndex>(side_len);
  }
}

bool BoxGeometry::contains(const Site& site) const {
  if (site.size() != dimension_) return false;
  for (int a = 0; a < dimension_; ++a) {
    if (std::abs(site[a]) > radius_) return false;
  }
  return true;
}

SiteIndex BoxGeometry::index(const Site& site) const {
  if (!contains(site)) throw ValidationError("site " + format_site(site) + " is outside " + describe());
  SiteIndex idx = 0;
  for (int a = 0; a < dimension_; ++a) idx += (site[a] + radius_) * strides_[static_cast<std::size_t>(a)];
  return idx;
}

Site BoxGeometry::site(SiteIndex index) const {
  if (index < 0 || index >= site_count_) {
    throw ValidationError("site index " + std::to_string(index) + " is outside " + describe());
  }
  Site x(dimension_);
  for (int a = 0; a < dimension_; ++a) x[a] = coordinate(index, a);
  return x;
}

int BoxGeometry::coordinate(SiteIndex index, int axis) const {
  return (index / strides_[static_cast<std::size_t>(axis)]) % side() - radius_;
}

SiteIndex BoxGeometry::origin() const { return (site_count_ - 1) / 2; }

SiteIndex BoxGeometry::neighbor(SiteIndex index, int direction) const {
  const int axis = direction / 2;
  const int step = (direction % 2 == 0) ? 1 : -1;
  const int c = coordinate(index, axis) + step;
  if (c > radius_ || c < -radius_) return kKilled;
  return index + step * strides_[static_cast<std::size_t>(axis)];
}

std::vector<std::optional<Site>> BoxGeometry::neighbors(const Site& site) const {
  const SiteIndex idx = index(site);
  std::vector<std::optional<Site>> out;
  out.reserve(static_cast<std::size_t>(neighbor_count()));
  for (int k = 0; k < neighbor_count(); ++k) {
    const SiteIndex nb = neighbor(idx, k);
    if (nb == kKilled) {
      out.emplace_back(std::nullopt);
    } else {
      out.emplace_back(this->site(nb));
    }
  }
  return out;
}

std::string BoxGeometry::describe() const {
  return "box d=" + std::to_string(dimension_) + " N=" + std::to_string(radius_);
}

BoxGeometry build_box(int dimension, int radius) { return BoxGeometry(dimension, radius); }

int l1_norm(const Site& site) { return site.size() == 0 ? 0 : site.cwiseAbs().sum(); }

int linf_norm(const Site& site) { return site.size() == 0 ? 0 : site.cwiseAbs().maxCoeff(); }

Site make_site(std::initializer_list<int> coords) {
  Site x(static_cast<Eigen::Index>(coords.size()));
  Eigen::Index i = 0;
  for (int c : coords) x[i++] = c;
  return x;
}

Site unit_vector(int dimension, int axis, int sign) {
  Site x = Site::Zero(dimension);
  x[axis] = sign;
  return x;
}

std::string format_site(const Site& site) {
  std::ostringstream os;
  os << '(';
  for (Eigen::Index a = 0; a < site.size(); ++a) {
    if (a) os << ',';
    os << site[a];
  }
  os << ')';
  return os.str();
}

}  // namespace rwrp
