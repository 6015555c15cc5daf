#include "rwrp/quenched.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <string>

#include "rwrp/errors.hpp"
#include "rwrp/mc_driver.hpp"
#include "rwrp/numerics.hpp"

namespace rwrp {

namespace {

constexpr double kFlushBelow = 1e-290;
constexpr double kResidualFloor = 1e-300;

void check_lambda(double lambda) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ValidationError("lambda must be finite and >= 0");
}

int l1_distance(const BoxGeometry& box, SiteIndex a, SiteIndex b) {
  int s = 0;
  for (int k = 0; k < box.dimension(); ++k) s += std::abs(box.coordinate(a, k) - box.coordinate(b, k));
  return s;
}

// Compressed rows of the sweep operator; fixed rows are empty.
struct SweepOperator {
  std::vector<std::int32_t> row_start;
  std::vector<SiteIndex> cols;
  std::vector<double> coef;
};

SweepOperator build_operator(const Environment& env, double lambda, double gauge, SiteIndex anchor,
                             const std::vector<std::uint8_t>& fixed) {
  const BoxGeometry& box = env.box();
  const int d = box.dimension();
  const int n = box.radius();
  const Site anchor_site = box.site(anchor);
  const double near = std::exp(gauge);   // neighbor one step closer to the anchor
  const double far = std::exp(-gauge);   // one step farther
  SweepOperator op;
  op.row_start.reserve(static_cast<std::size_t>(box.site_count()) + 1);
  op.cols.reserve(static_cast<std::size_t>(box.site_count()) * static_cast<std::size_t>(2 * d));
  op.coef.reserve(op.cols.capacity());
  op.row_start.push_back(0);
  const double inv2d = 1.0 / (2.0 * d);
  const double base0 = std::exp(-lambda) * inv2d;
  const double base1 = std::exp(-(1.0 + lambda)) * inv2d;
  for_each_site(box, [&](SiteIndex i, const Site& x) {
    if (!fixed[static_cast<std::size_t>(i)]) {
      const double base = env[i] ? base1 : base0;
      for (int a = 0; a < d; ++a) {
        const SiteIndex stride = box.stride(a);
        for (int s : {1, -1}) {
          const int c = x[a] + s;
          if (c > n || c < -n) continue;
          const bool farther = (x[a] - anchor_site[a]) * s >= 0;
          op.cols.push_back(i + s * stride);
          op.coef.push_back(base * (farther ? far : near));
        }
      }
    }
    op.row_start.push_back(static_cast<std::int32_t>(op.cols.size()));
  });
  return op;
}

double max_relative_residual(const SweepOperator& op, const Eigen::VectorXd& m) {
  double worst = 0.0;
  const auto rows = static_cast<SiteIndex>(op.row_start.size() - 1);
  for (SiteIndex i = 0; i < rows; ++i) {
    const auto lo = op.row_start[static_cast<std::size_t>(i)];
    const auto hi = op.row_start[static_cast<std::size_t>(i) + 1];
    if (lo == hi) continue;
    double s = 0.0;
    for (auto k = lo; k < hi; ++k) s += op.coef[static_cast<std::size_t>(k)] * m[op.cols[static_cast<std::size_t>(k)]];
    if (s < kFlushBelow) s = 0.0;
    worst = std::max(worst, std::abs(m[i] - s) / std::max(m[i], kResidualFloor));
  }
  return worst;
}

}  // namespace

QuenchedField::QuenchedField(BoxGeometry box, SiteIndex anchor, double shift, double gauge, Eigen::VectorXd mantissa,
                             double log_scale, double residual, std::int64_t iterations)
    : box_(std::move(box)),
      anchor_(anchor),
      shift_(shift),
      gauge_(gauge),
      mantissa_(std::move(mantissa)),
      log_scale_(log_scale),
      residual_(residual),
      iterations_(iterations) {}

double QuenchedField::log_value(SiteIndex x) const {
  const double m = mantissa_[x];
  if (m <= 0.0) return -std::numeric_limits<double>::infinity();
  const double dist = gauge_ == 0.0 ? 0.0 : static_cast<double>(l1_distance(box_, x, anchor_));
  return std::log(m) + log_scale_ - gauge_ * dist;
}

double QuenchedField::value(SiteIndex x) const { return std::exp(log_value(x)); }

QuenchedField solve_killed_system(const Environment& env, double lambda, std::span<const AbsorbingSite> absorbing,
                                  SiteIndex anchor, const SolverOptions& opts) {
  check_lambda(lambda);
  if (!(opts.tol > 0.0)) throw ValidationError("solver tolerance must be > 0");
  if (!(opts.relaxation > 0.0 && opts.relaxation < 2.0)) throw ValidationError("relaxation must lie in (0,2)");
  const BoxGeometry& box = env.box();
  const double gauge = lambda;
  std::vector<std::uint8_t> fixed(static_cast<std::size_t>(box.site_count()), 0);
  Eigen::VectorXd m = Eigen::VectorXd::Zero(box.site_count());
  for (const auto& a : absorbing) {
    if (a.site < 0 || a.site >= box.site_count()) throw ValidationError("absorbing site outside box");
    fixed[static_cast<std::size_t>(a.site)] = 1;
    m[a.site] = a.value * std::exp(gauge * l1_distance(box, a.site, anchor));
  }
  const SweepOperator op = build_operator(env, lambda, gauge, anchor, fixed);
  const double w = opts.relaxation;
  const auto rows = static_cast<SiteIndex>(box.site_count());
  double residual = std::numeric_limits<double>::infinity();
  for (std::int64_t sweep = 1; sweep <= opts.max_sweeps; ++sweep) {
    double max_change = 0.0;
    for (SiteIndex i = 0; i < rows; ++i) {
      const auto lo = op.row_start[static_cast<std::size_t>(i)];
      const auto hi = op.row_start[static_cast<std::size_t>(i) + 1];
      if (lo == hi) continue;
      double s = 0.0;
      for (auto k = lo; k < hi; ++k) s += op.coef[static_cast<std::size_t>(k)] * m[op.cols[static_cast<std::size_t>(k)]];
      const double old = m[i];
      double next = w == 1.0 ? s : old + w * (s - old);
      if (next < kFlushBelow) next = 0.0;
      m[i] = next;
      max_change = std::max(max_change, std::abs(next - old) / std::max(next, kResidualFloor));
    }
    if (max_change <= opts.tol) {
      residual = max_relative_residual(op, m);
      if (residual <= opts.tol) {
        return QuenchedField(box, anchor, lambda, gauge, std::move(m), 0.0, residual, sweep);
      }
    } else if (sweep == opts.max_sweeps) {
      residual = max_relative_residual(op, m);
    }
  }
  throw ConvergenceError("Gauss-Seidel did not reach tolerance " + std::to_string(opts.tol) + " within " +
                             std::to_string(opts.max_sweeps) + " sweeps (last residual " + std::to_string(residual) +
                             ")",
                         residual, opts.max_sweeps);
}

QuenchedField solve_travel_field(const Environment& env, SiteIndex y, double lambda, const SolverOptions& opts) {
  if (y < 0 || y >= env.box().site_count()) throw ValidationError("target y outside box");
  const AbsorbingSite target{y, 1.0};
  return solve_killed_system(env, lambda, std::span(&target, 1), y, opts);
}

QuenchedField solve_travel_field(const Environment& env, const Site& y, double lambda, const SolverOptions& opts) {
  return solve_travel_field(env, env.box().index(y), lambda, opts);
}

double quenched_cost(const Environment& env, SiteIndex start, SiteIndex y, double lambda, const SolverOptions& opts) {
  if (start == y) return 0.0;
  return solve_travel_field(env, y, lambda, opts).cost(start);
}

double hit_before_probability(const Environment& env, const QuenchedField& travel, SiteIndex z, SiteIndex start,
                              const SolverOptions& opts) {
  const SiteIndex y = travel.anchor();
  if (z == y) return 0.0;
  if (z == start) return 1.0;
  const double log_den = travel.log_value(start);
  if (!std::isfinite(log_den)) {
    throw NumericalError("hit_before_probability: e_N(start,y) underflows; path measure undefined");
  }
  const AbsorbingSite sites[] = {{z, 1.0}, {y, 0.0}};
  const QuenchedField w = solve_killed_system(env, travel.shift(), sites, z, opts);
  const double log_w = w.log_value(start);
  if (!std::isfinite(log_w)) return 0.0;
  return std::min(1.0, std::exp(log_w + travel.log_value(z) - log_den));
}

double hit_before_probability(const Environment& env, const Site& y, const Site& z, const Site& start, double lambda,
                              const SolverOptions& opts) {
  const BoxGeometry& box = env.box();
  const QuenchedField travel = solve_travel_field(env, y, lambda, opts);
  return hit_before_probability(env, travel, box.index(z), box.index(start), opts);
}

double expected_range(const Environment& env, const Site& y, double lambda, const SolverOptions& opts,
                      std::optional<std::span<const SiteIndex>> sites) {
  const BoxGeometry& box = env.box();
  const SiteIndex start = box.origin();
  const SiteIndex target = box.index(y);
  if (start == target) return 0.0;
  const QuenchedField travel = solve_travel_field(env, target, lambda, opts);
  std::vector<double> terms;
  auto add = [&](SiteIndex z) { terms.push_back(hit_before_probability(env, travel, z, start, opts)); };
  if (sites) {
    for (SiteIndex z : *sites) add(z);
  } else {
    for (SiteIndex z = 0; z < box.site_count(); ++z) add(z);
  }
  return pairwise_sum(terms);
}

double return_weight_psi(const Environment& env, SiteIndex z, double lambda, const SolverOptions& opts) {
  const BoxGeometry& box = env.box();
  if (z < 0 || z >= box.site_count()) throw ValidationError("return_weight_psi: z outside box");
  const AbsorbingSite site{z, 1.0};
  const QuenchedField v = solve_killed_system(env, lambda, std::span(&site, 1), z, opts);
  double s = 0.0;
  for (int k = 0; k < box.neighbor_count(); ++k) {
    const SiteIndex nb = box.neighbor(z, k);
    if (nb != kKilled) s += v.value(nb);
  }
  s /= box.neighbor_count();
  const double gap = 1.0 - s;
  if (gap <= 1e-12) {
    throw NumericalError("return_weight_psi: weighted return probability is within 1e-12 of 1 (near-recurrence)");
  }
  return 1.0 / gap;
}

double return_weight_psi(const Environment& env, const Site& z, double lambda, const SolverOptions& opts) {
  return return_weight_psi(env, env.box().index(z), lambda, opts);
}

FlipRatioReport flip_log_ratio(const Environment& env, const Site& y, const Site& z, double lambda,
                               const SolverOptions& opts) {
  const BoxGeometry& box = env.box();
  const SiteIndex yi = box.index(y);
  const SiteIndex zi = box.index(z);
  if (yi == zi) throw ValidationError("flip_log_ratio: z must differ from y");
  const SiteIndex start = box.origin();
  const double base = -quenched_cost(env, start, yi, lambda, opts);
  const double flipped = -quenched_cost(toggle_site(env, zi), start, yi, lambda, opts);
  return FlipRatioReport{z, env[zi], flipped - base};
}

FlipBoundRow flip_bound_row(const Environment& env, const Environment& psi_env, const Site& y, const Site& z,
                            const SolverOptions& opts) {
  FlipBoundRow row{flip_log_ratio(env, y, z, 0.0, opts), 0.0, 0.0, 0.0};
  row.psi = return_weight_psi(psi_env, z, 0.0, opts);
  row.hit_prob = hit_before_probability(env, y, z, Site::Zero(env.box().dimension()), 0.0, opts);
  row.bound_rhs = 4.0 * row.psi * row.hit_prob;
  return row;
}

double CostTable::expected_cost(double r) const {
  std::vector<double> terms(static_cast<std::size_t>(log_e.size()));
  for (Eigen::Index m = 0; m < log_e.size(); ++m) {
    terms[static_cast<std::size_t>(m)] = enumerator.weight(static_cast<std::uint64_t>(m), r) * -log_e[m];
  }
  return pairwise_sum(terms);
}

double CostTable::expected_cost_derivative(double r) const {
  const int n = enumerator.relevant_count();
  std::vector<double> terms(static_cast<std::size_t>(log_e.size()));
  for (Eigen::Index m = 0; m < log_e.size(); ++m) {
    const int ones = std::popcount(static_cast<std::uint64_t>(m));
    const int zeros = n - ones;
    // d/dr r^zeros (1-r)^ones
    double dw = 0.0;
    if (zeros > 0) dw += zeros * ipow(r, zeros - 1) * ipow(1.0 - r, ones);
    if (ones > 0) dw -= ones * ipow(r, zeros) * ipow(1.0 - r, ones - 1);
    terms[static_cast<std::size_t>(m)] = dw * -log_e[m];
  }
  return pairwise_sum(terms);
}

double CostTable::russo_sum(double r) const {
  const int n = enumerator.relevant_count();
  std::vector<double> terms(static_cast<std::size_t>(log_e.size()));
  for (Eigen::Index m = 0; m < log_e.size(); ++m) {
    const auto mask = static_cast<std::uint64_t>(m);
    double s = 0.0;
    for (int z = 0; z < n; ++z) {
      const auto other = static_cast<Eigen::Index>(mask ^ (std::uint64_t{1} << z));
      s += std::abs(log_e[other] - log_e[m]);
    }
    terms[static_cast<std::size_t>(m)] = enumerator.weight(mask, r) * s;
  }
  return pairwise_sum(terms);
}

CostTable tabulate_costs(const BoxGeometry& box, const Site& y, const TableOptions& opts) {
  const SiteIndex target = box.index(y);
  const SiteIndex start = box.origin();
  EnvironmentEnumerator en(box, reachable_sites(box, start, target), opts.guard);
  RunPlan plan;
  plan.experiment_id = "cost-table";
  plan.replicates = static_cast<std::int64_t>(en.size());
  plan.workers = opts.workers;
  const Payloads rows = collect(plan, 1, [&](std::int64_t mask, std::uint64_t, std::span<double> out) {
    out[0] = -quenched_cost(en.environment(static_cast<std::uint64_t>(mask)), start, target, opts.lambda, opts.solver);
  });
  return CostTable{std::move(en), Eigen::Map<const Eigen::VectorXd>(rows.data(), rows.rows())};
}

Estimate russo_rhs(const BoxGeometry& box, double r, const Site& y, const RussoOptions& opts) {
  if (!(r > 0.0 && r < 1.0)) throw ValidationError("russo_rhs: r must lie in (0,1)");
  const SiteIndex target = box.index(y);
  const SiteIndex start = box.origin();
  if (target == start) return Estimate{0.0, 0.0, 1};
  if (opts.estimator == Estimator::Exact) {
    const CostTable table = tabulate_costs(box, y, opts.table);
    return Estimate{table.russo_sum(r), 0.0, static_cast<std::int64_t>(table.enumerator.size())};
  }
  if (opts.replicates < 2) throw ValidationError("russo_rhs: Monte Carlo needs >= 2 replicates");
  const std::vector<SiteIndex> sites = reachable_sites(box, start, target);
  RunPlan plan;
  plan.experiment_id = "russo-rhs";
  plan.replicates = opts.replicates;
  plan.master_seed = opts.seed;
  plan.workers = opts.table.workers;
  const StreamingStats stats = run(plan, [&](std::int64_t, std::uint64_t seed) {
    const Environment env = sample_environment(box, r, seed);
    const double base = quenched_cost(env, start, target, opts.table.lambda, opts.table.solver);
    std::vector<double> terms;
    terms.reserve(sites.size());
    for (SiteIndex z : sites) {
      terms.push_back(std::abs(quenched_cost(toggle_site(env, z), start, target, opts.table.lambda, opts.table.solver) - base));
    }
    return pairwise_sum(terms);
  });
  return Estimate{stats.mean(), stats.std_error(), stats.count()};
}

}  // namespace rwrp
