#include "rwrp/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "rwrp/errors.hpp"
#include "rwrp/numerics.hpp"

namespace rwrp {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void check_pq(double p, double q) {
  if (!(p > 0.0 && p <= q && q < 1.0)) {
    throw ValidationError("bounds need 0 < p <= q < 1; got p=" + std::to_string(p) + ", q=" + std::to_string(q));
  }
}

BoundCell lower_cell(std::string id, double p, double q, double lambda, std::string x, double measured,
                     double std_error, double slack) {
  BoundCell c{std::move(id), p, q, lambda, std::move(x)};
  c.measured = measured;
  c.bound = kOneMinusInvE * (q - p);
  c.margin = measured - c.bound;
  c.std_error = std_error;
  c.verdict = classify(c.margin, std_error, slack);
  return c;
}

BoundCell upper_cell(std::string id, double p, double q, double lambda, std::string x, double measured, double bound,
                     double std_error, double slack) {
  BoundCell c{std::move(id), p, q, lambda, std::move(x)};
  c.measured = measured;
  c.bound = bound;
  c.margin = bound - measured;
  c.std_error = std_error;
  c.verdict = classify(c.margin, std_error, slack);
  return c;
}

BoundCell reported_cell(std::string id, double p, double q, double lambda, std::string x, double measured,
                        double std_error) {
  BoundCell c{std::move(id), p, q, lambda, std::move(x)};
  c.measured = measured;
  c.bound = kNaN;
  c.margin = kNaN;
  c.std_error = std_error;
  c.verdict = Verdict::Reported;
  return c;
}

double log_ratio_bound(int d, double p, double q) { return annealed_log_constant(d, q) * (std::log(q) - std::log(p)); }

std::string format_real_vector(const Eigen::VectorXd& x) {
  std::ostringstream os;
  os.precision(12);
  os << '(';
  for (Eigen::Index i = 0; i < x.size(); ++i) os << (i ? "," : "") << x[i];
  os << ')';
  return os.str();
}

BoundReport profile_cells(ExponentKind kind, int d, double p, double q, double lambda, const BoundsConfig& cfg) {
  BoundReport out;
  if (cfg.directions.empty()) return out;
  const ExponentKind kinds[] = {kind};
  const auto rows = lyapunov_difference_profile(d, p, q, lambda, cfg.directions, cfg.exponent, kinds);
  const int n_max = cfg.exponent.n_list.back();
  const bool quenched = kind == ExponentKind::Quenched;
  for (const auto& row : rows) {
    if (row.n != n_max) continue;
    const std::string xs = format_site(row.direction);
    auto low = lower_cell(quenched ? "QL_LOWER" : "AL_LOWER", p, q, lambda, xs, row.measured, row.std_error, 0.0);
    low.n = row.n;
    low.radius = row.radius;
    out.cells.push_back(low);
    if (quenched) {
      if (q > p) {
        auto up = reported_cell("QL_UPPER", p, q, lambda, xs, row.measured / (q - p), row.std_error / (q - p));
        up.n = row.n;
        up.radius = row.radius;
        out.cells.push_back(up);
      }
    } else {
      auto up = upper_cell("AL_UPPER_LOG", p, q, lambda, xs, row.measured, log_ratio_bound(d, p, q), row.std_error,
                           0.0);
      up.n = row.n;
      up.radius = row.radius;
      out.cells.push_back(up);
    }
  }
  return out;
}

BoundReport table_family(ExponentKind kind, int d, double p, double q, double lambda, const BoundsConfig& cfg) {
  BoundReport out;
  for (const auto& t : cfg.exact_targets) {
    if (t.y.size() != d) throw ValidationError("exact target dimension does not match d");
    const BoxGeometry box(d, t.radius);
    const CostTable table = tabulate_costs(
        box, t.y, TableOptions{lambda, cfg.exponent.solver, cfg.exponent.workers, cfg.exponent.guard});
    BoundReport part = kind == ExponentKind::Quenched ? quenched_table_cells(table, t.y, p, q, lambda, cfg.exact_slack)
                                                      : annealed_table_cells(table, t.y, p, q, lambda, cfg.exact_slack);
    for (auto& c : part.cells) c.radius = t.radius;
    out.append(part);
  }
  return out;
}

}  // namespace

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::Pass: return "PASS";
    case Verdict::PassWithinError: return "PASS_WITHIN_ERROR";
    case Verdict::Fail: return "FAIL";
    case Verdict::Reported: return "REPORTED";
  }
  return "FAIL";
}

Verdict classify(double margin, double std_error, double slack) {
  if (std::isnan(margin)) return Verdict::Fail;
  if (margin >= 0.0) return Verdict::Pass;
  if (margin >= -3.0 * std_error || margin >= -slack) return Verdict::PassWithinError;
  return Verdict::Fail;
}

bool BoundReport::any_fail() const {
  return std::any_of(cells.begin(), cells.end(), [](const BoundCell& c) { return c.verdict == Verdict::Fail; });
}

void BoundReport::append(const BoundReport& other) { cells.insert(cells.end(), other.cells.begin(), other.cells.end()); }

double annealed_log_constant(int d, double q) { return range_constant(d, q); }

BoundReport quenched_table_cells(const CostTable& table, const Site& y, double p, double q, double lambda,
                                 double slack) {
  check_pq(p, q);
  const double l1 = l1_norm(y);
  if (l1 == 0) throw ValidationError("bound cells need y != 0");
  const double ep = table.expected_cost(p);
  const double eq = table.expected_cost(q);
  const std::string xs = format_site(y);
  BoundReport out;
  out.cells.push_back(lower_cell("QL_LOWER", p, q, lambda, xs, (ep - eq) / l1, 0.0, slack));
  const double ratio = q > p ? (ep - eq) / ((q - p) * l1) : -table.expected_cost_derivative(p) / l1;
  out.cells.push_back(reported_cell("QL_UPPER", p, q, lambda, xs, ratio, 0.0));
  return out;
}

BoundReport annealed_table_cells(const CostTable& table, const Site& y, double p, double q, double lambda,
                                 double slack) {
  check_pq(p, q);
  const double l1 = l1_norm(y);
  if (l1 == 0) throw ValidationError("bound cells need y != 0");
  const double measured = (annealed_cost_from_table(table, p) - annealed_cost_from_table(table, q)) / l1;
  const std::string xs = format_site(y);
  BoundReport out;
  out.cells.push_back(lower_cell("AL_LOWER", p, q, lambda, xs, measured, 0.0, slack));
  out.cells.push_back(upper_cell("AL_UPPER_LOG", p, q, lambda, xs, measured,
                                 log_ratio_bound(table.enumerator.box().dimension(), p, q), 0.0, slack));
  return out;
}

BoundReport check_quenched_bounds(int d, double p, double q, const BoundsConfig& cfg) {
  check_pq(p, q);
  BoundReport out;
  for (double lambda : cfg.lambdas) {
    out.append(table_family(ExponentKind::Quenched, d, p, q, lambda, cfg));
    out.append(profile_cells(ExponentKind::Quenched, d, p, q, lambda, cfg));
  }
  return out;
}

BoundReport check_annealed_bounds(int d, double p, double q, const BoundsConfig& cfg) {
  check_pq(p, q);
  BoundReport out;
  for (double lambda : cfg.lambdas) {
    out.append(table_family(ExponentKind::Annealed, d, p, q, lambda, cfg));
    out.append(profile_cells(ExponentKind::Annealed, d, p, q, lambda, cfg));
    if (!cfg.derivative_ratio) continue;
    if (cfg.ratio_rs.size() < 2) throw ValidationError("the derivative ratio needs at least two r values");
    const Site y = cfg.directions.empty() ? unit_vector(d, 0, 1) : cfg.directions.front();
    const BoxGeometry box(d, cfg.ratio_radius);
    const double l1 = l1_norm(y);
    double lo = std::numeric_limits<double>::infinity(), hi = -lo, lo_se = 0.0, hi_se = 0.0;
    for (double r : cfg.ratio_rs) {
      const Estimate e = annealed_derivative_formula(box, r, y, lambda, cfg.ratio_options);
      const double v = e.value / l1;
      if (v < lo) lo = v, lo_se = e.std_error / l1;
      if (v > hi) hi = v, hi_se = e.std_error / l1;
    }
    const double ratio = hi / lo;
    const double se = ratio * std::hypot(hi_se / hi, lo_se / lo);
    auto c = upper_cell("AL_UPPER_LIN_D3", p, q, lambda, format_site(y), ratio, cfg.ratio_limit, se, 0.0);
    c.n = 1;
    c.radius = cfg.ratio_radius;
    out.cells.push_back(c);
  }
  return out;
}

LyapunovPoint LyapunovCache::get_or_compute(ExponentKind kind, int d, double r, double lambda, const Site& x,
                                            const ExponentConfig& cfg) {
  std::ostringstream schedule;
  for (int n : cfg.n_list) schedule << n << ',';
  schedule << '|' << cfg.box_rule.str() << '|' << to_string(cfg.estimator) << '|' << cfg.step_cap << '|'
           << cfg.solver.tol;
  Key key{static_cast<int>(kind), d, r, lambda, std::vector<int>(x.data(), x.data() + x.size()), schedule.str(),
          cfg.seed, cfg.replicates, cfg.guard};
  {
    const std::lock_guard lock(mutex_);
    if (auto it = entries_.find(key); it != entries_.end()) return it->second;
  }
  LyapunovPoint pt = estimate_lyapunov(kind, d, r, lambda, x, cfg);
  const std::lock_guard lock(mutex_);
  return entries_.try_emplace(std::move(key), std::move(pt)).first->second;
}

std::size_t LyapunovCache::size() const {
  const std::lock_guard lock(mutex_);
  return entries_.size();
}

RationalDirection rational_direction(const Eigen::VectorXd& x) {
  for (int m = 1; m <= 1000; ++m) {
    Site v(x.size());
    bool integral = true;
    for (Eigen::Index i = 0; i < x.size() && integral; ++i) {
      const double t = m * x[i];
      const double rt = std::round(t);
      integral = std::abs(t - rt) <= 1e-9 * std::max(1.0, std::abs(t));
      v[i] = static_cast<int>(rt);
    }
    if (!integral) continue;
    int g = 0;
    for (Eigen::Index i = 0; i < v.size(); ++i) g = std::gcd(g, std::abs(v[i]));
    if (g == 0) return RationalDirection{v, 0.0};
    return RationalDirection{Site(v / g), static_cast<double>(g) / m};
  }
  throw ValidationError("x must be rational with denominator <= 1000");
}

RateSample rate_objective(int d, double r, const Eigen::VectorXd& x, ExponentKind kind, double lambda,
                          const RateSearchConfig& cfg) {
  const RationalDirection rd = rational_direction(x);
  if (rd.scale == 0.0) return RateSample{lambda, -lambda, 0.0};
  const LyapunovPoint pt = cfg.cache ? cfg.cache->get_or_compute(kind, d, r, lambda, rd.primitive, cfg.exponent)
                                     : estimate_lyapunov(kind, d, r, lambda, rd.primitive, cfg.exponent);
  return RateSample{lambda, rd.scale * pt.extrapolated - lambda, rd.scale * pt.extrapolated_se};
}

RateFunctionValue rate_function(int d, double r, const Eigen::VectorXd& x, ExponentKind kind,
                                const RateSearchConfig& cfg) {
  if (!(r > 0.0 && r <= 1.0)) throw ValidationError("rate function needs 0 < r <= 1, got " + std::to_string(r));
  if (x.size() != d) throw ValidationError("x dimension does not match d");
  if (!(x.lpNorm<1>() < 1.0)) {
    throw ValidationError("x must lie in the open unit l1 ball; |x|_1 = " + std::to_string(x.lpNorm<1>()));
  }
  if (!(cfg.tol > 0.0) || cfg.max_evaluations < 4 || !(cfg.bracket_start > 0.0) ||
      cfg.bracket_max < cfg.bracket_start) {
    throw ValidationError("invalid rate search configuration");
  }
  RateFunctionValue out;
  out.kind = kind;
  out.r = r;
  out.x = x;
  if (rational_direction(x).scale == 0.0) return out;

  RateSearchConfig local = cfg;
  if (!local.cache) local.cache = std::make_shared<LyapunovCache>();
  std::map<double, RateSample> seen;
  auto eval = [&](double lambda) -> double {
    if (auto it = seen.find(lambda); it != seen.end()) return it->second.g;
    const RateSample s = rate_objective(d, r, x, kind, lambda, local);
    seen.emplace(lambda, s);
    out.trajectory.push_back(s);
    return s.g;
  };
  auto budget_left = [&] { return static_cast<int>(seen.size()) < cfg.max_evaluations; };

  eval(0.0);
  double hi = cfg.bracket_start;
  eval(hi / 2);
  eval(hi);
  while (seen.at(hi).g >= seen.at(hi / 2).g && hi < cfg.bracket_max && budget_left()) {
    hi *= 2;
    eval(hi);
  }
  double lo = hi > cfg.bracket_start ? hi / 4 : 0.0;
  if (seen.at(hi).g >= seen.at(hi / 2).g) {
    out.at_bracket_max = true;
    lo = hi / 2;
  } else {
    const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = hi - phi * (hi - lo);
    double e = lo + phi * (hi - lo);
    double gc = eval(c);
    double ge = eval(e);
    while (hi - lo > cfg.tol && budget_left()) {
      if (gc >= ge) {
        hi = e;
        e = c;
        ge = gc;
        c = hi - phi * (hi - lo);
        gc = eval(c);
      } else {
        lo = c;
        c = e;
        gc = ge;
        e = lo + phi * (hi - lo);
        ge = eval(e);
      }
    }
    if (hi - lo > cfg.tol) out.at_bracket_max = true;
  }
  out.lo = lo;
  out.hi = hi;
  out.evaluations = static_cast<int>(seen.size());

  std::vector<RateSample> pts;
  for (const auto& [lambda, s] : seen) pts.push_back(s);
  for (std::size_t i = 1; i + 1 < pts.size(); ++i) {
    const auto& a = pts[i - 1];
    const auto& b = pts[i];
    const auto& c = pts[i + 1];
    const double chord = a.g + (c.g - a.g) * (b.lambda - a.lambda) / (c.lambda - a.lambda);
    const double noise = cfg.concavity_sigmas * std::sqrt(a.std_error * a.std_error + b.std_error * b.std_error +
                                                          c.std_error * c.std_error) +
                         1e-9 * (1.0 + std::abs(b.g));
    if (b.g < chord - noise) {
      std::ostringstream msg;
      msg.precision(17);
      msg << "non-concave exponent samples at lambda = (" << a.lambda << ", " << b.lambda << ", " << c.lambda
          << ") with g = (" << a.g << ", " << b.g << ", " << c.g << ")";
      throw NumericalError(msg.str());
    }
  }
  const auto best = std::max_element(pts.begin(), pts.end(), [](const auto& a, const auto& b) { return a.g < b.g; });
  out.value = best->g;
  out.std_error = best->std_error;
  out.lambda_star = best->lambda;
  out.alpha_at_zero = pts.front().g;
  return out;
}

BoundReport check_rate_bounds(int d, double p, double q, std::span<const Eigen::VectorXd> xs,
                              std::span<const ExponentKind> kinds, const RateSearchConfig& cfg) {
  check_pq(p, q);
  RateSearchConfig local = cfg;
  if (!local.cache) local.cache = std::make_shared<LyapunovCache>();
  constexpr double slack = 1e-8;
  BoundReport out;
  for (const Eigen::VectorXd& x : xs) {
    const double l1 = x.lpNorm<1>();
    if (l1 == 0.0) throw ValidationError("rate bound cells need x != 0");
    const std::string label = format_real_vector(x);
    for (ExponentKind kind : kinds) {
      const RateFunctionValue ip = rate_function(d, p, x, kind, local);
      const RateFunctionValue iq = rate_function(d, q, x, kind, local);
      const double measured = (ip.value - iq.value) / l1;
      const double se = std::hypot(ip.std_error, iq.std_error) / l1;
      const bool quenched = kind == ExponentKind::Quenched;
      out.cells.push_back(lower_cell("RATE_LOWER", p, q, 0.0, label, measured, se, slack));
      if (quenched) {
        if (q > p) out.cells.push_back(reported_cell("RATE_UPPER", p, q, 0.0, label, measured / (q - p), se / (q - p)));
      } else {
        out.cells.push_back(upper_cell("RATE_UPPER", p, q, 0.0, label, measured, log_ratio_bound(d, p, q), se, slack));
      }
      const double t = iq.lambda_star;
      const RateSample sp = rate_objective(d, p, x, kind, t, local);
      const RateSample sq = rate_objective(d, q, x, kind, t, local);
      BoundCell c{"RATE_TRANSFER", p, q, t, label};
      c.measured = ip.value - sq.g;
      c.bound = sp.g - sq.g;
      c.margin = c.measured - c.bound;
      c.std_error = std::hypot(ip.std_error, sp.std_error);
      c.verdict = classify(c.margin, c.std_error, slack);
      out.cells.push_back(c);
    }
  }
  return out;
}

}  // namespace rwrp
