#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "rwrp/lattice.hpp"

namespace rwrp {

inline constexpr int kDefaultEnumerationGuard = 24;

// A {0,1}-valued potential on a box. When sampled through the monotone
// coupling it keeps the per-site uniforms, with value 1 iff uniform >= r.
class Environment {
 public:
  Environment(BoxGeometry box, std::vector<std::uint8_t> values);

  static Environment constant(const BoxGeometry& box, int value);

  const BoxGeometry& box() const { return box_; }
  std::uint8_t operator[](SiteIndex i) const { return values_[static_cast<std::size_t>(i)]; }
  std::uint8_t at(const Site& site) const { return (*this)[box_.index(site)]; }
  std::span<const std::uint8_t> values() const { return values_; }

  bool has_uniforms() const { return uniforms_ != nullptr; }
  std::span<const double> uniforms() const;
  std::optional<double> parameter_r() const { return r_; }
  std::optional<std::uint64_t> seed() const { return seed_; }

  // Equal boxes and equal values; provenance is ignored.
  friend bool operator==(const Environment& a, const Environment& b) {
    return a.box_ == b.box_ && a.values_ == b.values_;
  }

 private:
  friend Environment sample_environment(const BoxGeometry&, double, std::uint64_t);
  friend Environment couple(const Environment&, double);

  BoxGeometry box_;
  std::vector<std::uint8_t> values_;
  std::shared_ptr<const std::vector<double>> uniforms_;
  std::optional<double> r_;
  std::optional<std::uint64_t> seed_;
};

Environment sample_environment(const BoxGeometry& box, double r, std::uint64_t seed);

// Re-threshold the stored uniforms at r_new.
Environment couple(const Environment& env, double r_new);

// Copy with the value at z set to v; drops the uniforms.
Environment flip_site(const Environment& env, const Site& z, int v);
Environment flip_site(const Environment& env, SiteIndex z, int v);
// omega_z: the value at z toggled.
Environment toggle_site(const Environment& env, SiteIndex z);

struct WeightedEnvironment {
  Environment environment;
  double weight;
  std::uint64_t mask;
};

// Random access to the 2^n environments over n relevant sites; bit i of a mask
// is the value at relevant_sites()[i]. All other sites hold 0.
class EnvironmentEnumerator {
 public:
  EnvironmentEnumerator(BoxGeometry box, std::vector<SiteIndex> relevant, int guard = kDefaultEnumerationGuard);

  const BoxGeometry& box() const { return box_; }
  std::span<const SiteIndex> relevant_sites() const { return relevant_; }
  int relevant_count() const { return static_cast<int>(relevant_.size()); }
  std::uint64_t size() const { return std::uint64_t{1} << relevant_.size(); }

  Environment environment(std::uint64_t mask) const;
  double weight(std::uint64_t mask, double r) const;

  // Position of a box site among the relevant sites, or -1.
  int position(SiteIndex site) const;

 private:
  BoxGeometry box_;
  std::vector<SiteIndex> relevant_;
};

// Calls fn(const WeightedEnvironment&) for every environment in mask order.
template <typename Fn>
void enumerate_environments(const BoxGeometry& box, std::vector<SiteIndex> relevant, double r, Fn&& fn,
                            int guard = kDefaultEnumerationGuard) {
  const EnvironmentEnumerator en(box, std::move(relevant), guard);
  for (std::uint64_t m = 0; m < en.size(); ++m) fn(WeightedEnvironment{en.environment(m), en.weight(m, r), m});
}

// Sites whose potential can influence e_N(start, target): those reachable from
// start inside the box without passing through target.
std::vector<SiteIndex> reachable_sites(const BoxGeometry& box, SiteIndex start, SiteIndex target);
// Every box site except target.
std::vector<SiteIndex> sites_except(const BoxGeometry& box, SiteIndex target);

// ASCII format: header "d N r seed" ('-' for absent), then "index value" lines.
void write_environment(std::ostream& os, const Environment& env);
Environment read_environment(std::istream& is);

}  // namespace rwrp
