#include "rwrp/environment.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "rwrp/errors.hpp"
#include "rwrp/numerics.hpp"
#include "rwrp/random.hpp"

namespace rwrp {

namespace {

void check_probability(double r, const char* name) {
  if (!(r >= 0.0 && r <= 1.0)) {
    throw ValidationError(std::string(name) + " must lie in [0,1], got " + std::to_string(r));
  }
}

std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace

Environment::Environment(BoxGeometry box, std::vector<std::uint8_t> values)
    : box_(std::move(box)), values_(std::move(values)) {
  if (values_.size() != static_cast<std::size_t>(box_.site_count())) {
    throw ValidationError("environment has " + std::to_string(values_.size()) + " values for " + box_.describe());
  }
  for (auto v : values_) {
    if (v > 1) throw ValidationError("environment values must be 0 or 1");
  }
}

Environment Environment::constant(const BoxGeometry& box, int value) {
  if (value != 0 && value != 1) throw ValidationError("potential value must be 0 or 1");
  return Environment(box, std::vector<std::uint8_t>(static_cast<std::size_t>(box.site_count()),
                                                    static_cast<std::uint8_t>(value)));
}

std::span<const double> Environment::uniforms() const {
  if (!uniforms_) return {};
  return *uniforms_;
}

Environment sample_environment(const BoxGeometry& box, double r, std::uint64_t seed) {
  check_probability(r, "r");
  auto u = std::make_shared<std::vector<double>>(static_cast<std::size_t>(box.site_count()));
  std::vector<std::uint8_t> values(u->size());
  for (SiteIndex i = 0; i < box.site_count(); ++i) {
    const double ui = site_uniform(seed, box, i);
    (*u)[static_cast<std::size_t>(i)] = ui;
    values[static_cast<std::size_t>(i)] = ui >= r ? 1 : 0;
  }
  Environment env(box, std::move(values));
  env.uniforms_ = std::move(u);
  env.r_ = r;
  env.seed_ = seed;
  return env;
}

Environment couple(const Environment& env, double r_new) {
  check_probability(r_new, "r_new");
  if (!env.has_uniforms()) throw ValidationError("couple: environment carries no uniforms");
  std::vector<std::uint8_t> values(env.values_.size());
  const auto& u = *env.uniforms_;
  for (std::size_t i = 0; i < values.size(); ++i) values[i] = u[i] >= r_new ? 1 : 0;
  Environment out(env.box_, std::move(values));
  out.uniforms_ = env.uniforms_;
  out.r_ = r_new;
  out.seed_ = env.seed_;
  return out;
}

Environment flip_site(const Environment& env, SiteIndex z, int v) {
  if (z < 0 || z >= env.box().site_count()) throw ValidationError("flip_site: site index outside box");
  if (v != 0 && v != 1) throw ValidationError("flip_site: value must be 0 or 1");
  std::vector<std::uint8_t> values(env.values().begin(), env.values().end());
  values[static_cast<std::size_t>(z)] = static_cast<std::uint8_t>(v);
  return Environment(env.box(), std::move(values));
}

Environment flip_site(const Environment& env, const Site& z, int v) {
  return flip_site(env, env.box().index(z), v);
}

Environment toggle_site(const Environment& env, SiteIndex z) { return flip_site(env, z, 1 - env[z]); }

EnvironmentEnumerator::EnvironmentEnumerator(BoxGeometry box, std::vector<SiteIndex> relevant, int guard)
    : box_(std::move(box)), relevant_(std::move(relevant)) {
  if (guard > 62) guard = 62;
  if (static_cast<int>(relevant_.size()) > guard) {
    throw GuardError("enumeration over " + std::to_string(relevant_.size()) +
                     " relevant sites exceeds the enumeration guard of " + std::to_string(guard) +
                     " (raise it with --enum-guard)");
  }
  for (auto s : relevant_) {
    if (s < 0 || s >= box_.site_count()) throw ValidationError("relevant site outside box");
  }
}

Environment EnvironmentEnumerator::environment(std::uint64_t mask) const {
  std::vector<std::uint8_t> values(static_cast<std::size_t>(box_.site_count()), 0);
  for (std::size_t i = 0; i < relevant_.size(); ++i) {
    values[static_cast<std::size_t>(relevant_[i])] = static_cast<std::uint8_t>((mask >> i) & 1U);
  }
  return Environment(box_, std::move(values));
}

double EnvironmentEnumerator::weight(std::uint64_t mask, double r) const {
  const int ones = std::popcount(mask);
  return bernoulli_weight(r, relevant_count() - ones, ones);
}

int EnvironmentEnumerator::position(SiteIndex site) const {
  for (std::size_t i = 0; i < relevant_.size(); ++i) {
    if (relevant_[i] == site) return static_cast<int>(i);
  }
  return -1;
}

std::vector<SiteIndex> reachable_sites(const BoxGeometry& box, SiteIndex start, SiteIndex target) {
  std::vector<SiteIndex> out;
  if (start == target) return out;
  std::vector<std::uint8_t> seen(static_cast<std::size_t>(box.site_count()), 0);
  std::vector<SiteIndex> stack{start};
  seen[static_cast<std::size_t>(start)] = 1;
  seen[static_cast<std::size_t>(target)] = 1;
  while (!stack.empty()) {
    const SiteIndex x = stack.back();
    stack.pop_back();
    out.push_back(x);
    for (int k = 0; k < box.neighbor_count(); ++k) {
      const SiteIndex nb = box.neighbor(x, k);
      if (nb == kKilled || seen[static_cast<std::size_t>(nb)]) continue;
      seen[static_cast<std::size_t>(nb)] = 1;
      stack.push_back(nb);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<SiteIndex> sites_except(const BoxGeometry& box, SiteIndex target) {
  std::vector<SiteIndex> out;
  out.reserve(static_cast<std::size_t>(box.site_count()));
  for (SiteIndex i = 0; i < box.site_count(); ++i) {
    if (i != target) out.push_back(i);
  }
  return out;
}

void write_environment(std::ostream& os, const Environment& env) {
  const auto& box = env.box();
  os << box.dimension() << ' ' << box.radius() << ' '
     << (env.parameter_r() ? format_double(*env.parameter_r()) : std::string("-")) << ' '
     << (env.seed() ? std::to_string(*env.seed()) : std::string("-")) << '\n';
  for (SiteIndex i = 0; i < box.site_count(); ++i) os << i << ' ' << int{env[i]} << '\n';
}

Environment read_environment(std::istream& is) {
  std::string header;
  if (!std::getline(is, header)) throw ValidationError("environment file: missing header");
  std::istringstream hs(header);
  int d = 0, n = 0;
  std::string r_tok, seed_tok;
  if (!(hs >> d >> n >> r_tok >> seed_tok)) throw ValidationError("environment file: header must be 'd N r seed'");
  const BoxGeometry box(d, n);
  std::vector<std::uint8_t> values(static_cast<std::size_t>(box.site_count()));
  std::vector<std::uint8_t> seen(values.size(), 0);
  long long idx = 0;
  int v = 0;
  std::size_t lines = 0;
  while (is >> idx >> v) {
    if (idx < 0 || idx >= box.site_count()) throw ValidationError("environment file: index out of range");
    if (v != 0 && v != 1) throw ValidationError("environment file: value must be 0 or 1");
    if (seen[static_cast<std::size_t>(idx)]) throw ValidationError("environment file: duplicate index");
    seen[static_cast<std::size_t>(idx)] = 1;
    values[static_cast<std::size_t>(idx)] = static_cast<std::uint8_t>(v);
    ++lines;
  }
  if (lines != values.size()) throw ValidationError("environment file: expected one line per site");
  if (r_tok != "-" && seed_tok != "-") {
    // Sampled environment: regenerate so the uniforms (and coupling) survive.
    const double r = std::strtod(r_tok.c_str(), nullptr);
    const std::uint64_t seed = std::stoull(seed_tok);
    Environment env = sample_environment(box, r, seed);
    if (!std::equal(values.begin(), values.end(), env.values().begin())) {
      throw ValidationError("environment file: values do not match the recorded (r, seed)");
    }
    return env;
  }
  return Environment(box, std::move(values));
}

}  // namespace rwrp
