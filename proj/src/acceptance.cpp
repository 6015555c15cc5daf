#include "rwrp/acceptance.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <ostream>
#include <sstream>

#include "rwrp/annealed.hpp"
#include "rwrp/bounds.hpp"
#include "rwrp/errors.hpp"
#include "rwrp/lyapunov.hpp"
#include "rwrp/mc_driver.hpp"
#include "rwrp/numerics.hpp"
#include "rwrp/quenched.hpp"

namespace rwrp {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

template <typename... Args>
std::string fmt(const char* pattern, Args... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, pattern, args...);
  return buf;
}

struct Budget {
  std::int64_t derivative_replicates;
  std::int64_t triangle_replicates;
  std::int64_t range_environments;
  std::int64_t psi_pairs;
  std::int64_t coupling_trials;
  std::int64_t lyapunov_replicates;
  std::int64_t determinism_replicates;
  std::int64_t perf_replicates;
};

Budget budget_for(Profile p) {
  if (p == Profile::Smoke) return Budget{20'000, 20'000, 20, 20, 100, 32, 400, 1'000};
  return Budget{100'000, 100'000, 200, 100, 1'000, 200, 2'000, 10'000};
}

struct SmallCase {
  int d;
  int radius;
  Site y;
};

std::vector<SmallCase> small_cases() {
  return {{1, 1, make_site({1})}, {1, 2, make_site({1})}, {1, 2, make_site({2})}, {2, 1, make_site({1, 0})}};
}

std::string describe(const SmallCase& c) { return fmt("d=%d N=%d y=%s", c.d, c.radius, format_site(c.y).c_str()); }

const std::vector<double>& r_grid() {
  static const std::vector<double> g{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  return g;
}

double rel_diff(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

struct Context {
  AcceptanceOptions opts;
  Budget budget;
  std::uint64_t seed(std::uint64_t k) const { return stream_seed(opts.seed, k); }
};

CriterionResult closed_forms(const Context&) {
  const BoxGeometry box(1, 1);
  const Site y = make_site({1});
  const double expected[] = {2.0 / 3.0, (std::exp(-1.0) / 2.0) / (1.0 - std::exp(-2.0) / 4.0)};
  double worst_err = 0.0, worst_ms = 0.0;
  for (int v = 0; v < 2; ++v) {
    const Environment env = Environment::constant(box, v);
    const auto t0 = Clock::now();
    const QuenchedField f = solve_travel_field(env, y);
    const double ms = 1e3 * seconds_since(t0);
    worst_err = std::max(worst_err, rel_diff(f.value(box.origin()), expected[v]));
    worst_ms = std::max(worst_ms, ms);
  }
  return {1, "closed-form quenched solves", worst_err <= 1e-10 && worst_ms < 1.0,
          fmt("max rel err %.2e (tol 1e-10), max time %.3f ms (limit 1 ms)", worst_err, worst_ms), 0.0};
}

CriterionResult russo_identity(const Context& ctx) {
  double worst = 0.0;
  std::string where;
  for (const auto& c : small_cases()) {
    const BoxGeometry box(c.d, c.radius);
    const CostTable table = tabulate_costs(box, c.y, TableOptions{0.0, {}, ctx.opts.workers});
    for (double r : {0.2, 0.5, 0.8}) {
      RussoOptions ro;
      ro.table.workers = ctx.opts.workers;
      const double rhs = russo_rhs(box, r, c.y, ro).value;
      const double lhs = -table.expected_cost_derivative(r);
      const double e = rel_diff(rhs, lhs);
      if (e >= worst) {
        worst = e;
        where = describe(c) + fmt(" r=%.1f", r);
      }
    }
  }
  return {2, "Russo identity on enumerated tables", worst <= 1e-8,
          fmt("max rel diff %.2e (tol 1e-8) at %s", worst, where.c_str()), 0.0};
}

CriterionResult quenched_lower_bound(const Context& ctx) {
  double worst = std::numeric_limits<double>::infinity();
  std::string where;
  int cells = 0;
  for (const auto& c : small_cases()) {
    const CostTable table = tabulate_costs(BoxGeometry(c.d, c.radius), c.y, TableOptions{0.0, {}, ctx.opts.workers});
    for (double p : r_grid()) {
      for (double q : r_grid()) {
        if (q < p) continue;
        const BoundCell cell = quenched_table_cells(table, c.y, p, q, 0.0).cells.front();
        ++cells;
        if (cell.margin < worst) {
          worst = cell.margin;
          where = describe(c) + fmt(" p=%.1f q=%.1f", p, q);
        }
      }
    }
  }
  return {3, "pre-limit quenched lower bound", worst >= -1e-10,
          fmt("%d cells, min margin %.3e (floor -1e-10) at %s", cells, worst, where.c_str()), 0.0};
}

CriterionResult derivative_identity(const Context& ctx) {
  double worst_fd = 0.0, worst_z = 0.0;
  std::string fd_at, z_at;
  int k = 0;
  for (const auto& c : small_cases()) {
    const BoxGeometry box(c.d, c.radius);
    const CostTable table = tabulate_costs(box, c.y, TableOptions{0.0, {}, ctx.opts.workers});
    for (double r : r_grid()) {
      const double flip = annealed_derivative_from_table(table, r);
      const double fd = annealed_fd_from_table(table, r, 1e-4);
      if (rel_diff(fd, flip) >= worst_fd) {
        worst_fd = rel_diff(fd, flip);
        fd_at = describe(c) + fmt(" r=%.1f", r);
      }
      AnnealedOptions ao;
      ao.replicates = ctx.budget.derivative_replicates;
      ao.seed = ctx.seed(100 + k++);
      ao.workers = ctx.opts.workers;
      const Estimate f = annealed_derivative_formula(box, r, c.y, 0.0, ao);
      const double z = std::abs(f.value - flip) / f.std_error;
      if (z >= worst_z) {
        worst_z = z;
        z_at = describe(c) + fmt(" r=%.1f", r);
      }
    }
  }
  return {4, "annealed derivative identity", worst_fd <= 1e-6 && worst_z <= 3.0,
          fmt("flip vs fd max rel %.2e (tol 1e-6) at %s; path formula max |z| %.2f (limit 3) at %s, %lld walks each",
              worst_fd, fd_at.c_str(), worst_z, z_at.c_str(), static_cast<long long>(ctx.budget.derivative_replicates)),
          0.0};
}

CriterionResult estimator_triangle(const Context& ctx) {
  const BoxGeometry box(1, 2);
  const Site y = make_site({2});
  double worst = 0.0;
  std::string where;
  int k = 0;
  for (double r : {0.2, 0.5, 0.8}) {
    AnnealedOptions ao;
    ao.replicates = ctx.budget.triangle_replicates;
    ao.workers = ctx.opts.workers;
    const CostEstimate ex = annealed_cost_exact(box, r, y, 0.0, ao);
    ao.seed = ctx.seed(200 + k++);
    const CostEstimate env = annealed_cost_env_mc(box, r, y, 0.0, ao);
    ao.seed = ctx.seed(200 + k++);
    const CostEstimate path = annealed_cost_path_mc(box, r, y, 0.0, ao);
    const CostEstimate* all[] = {&ex, &env, &path};
    for (int i = 0; i < 3; ++i) {
      for (int j = i + 1; j < 3; ++j) {
        const double z = std::abs(all[i]->value - all[j]->value) / std::hypot(all[i]->std_error, all[j]->std_error);
        if (z >= worst) {
          worst = z;
          where = fmt("r=%.1f %s vs %s", r, estimator_tag(all[i]->estimator).c_str(),
                      estimator_tag(all[j]->estimator).c_str());
        }
      }
    }
  }
  return {5, "estimator triangle", worst <= 3.0,
          fmt("max pairwise |z| %.2f (limit 3) at %s, %lld replicates", worst, where.c_str(),
              static_cast<long long>(ctx.budget.triangle_replicates)),
          0.0};
}

CriterionResult range_bounds(const Context& ctx) {
  const BoxGeometry box(2, 6);
  const Site y = make_site({3, 0});
  bool ok = true;
  std::string detail;
  int k = 0;
  for (double r : {0.3, 0.6}) {
    RunPlan plan;
    plan.experiment_id = "acceptance-range";
    plan.replicates = ctx.budget.range_environments;
    plan.master_seed = ctx.seed(300 + k++);
    plan.workers = ctx.opts.workers;
    const StreamingStats s = run(plan, [&](std::int64_t, std::uint64_t seed) {
      return expected_range(sample_environment(box, r, seed), y) / 3.0;
    });
    const double upper = range_constant(2, r);
    const bool cell = s.mean() >= 1.0 - 3.0 * s.std_error() && s.mean() <= upper + 3.0 * s.std_error();
    ok = ok && cell;
    detail += fmt("%sr=%.1f ratio %.4f +- %.4f in [1, %.4f]", detail.empty() ? "" : "; ", r, s.mean(), s.std_error(),
                  upper);
  }
  return {6, "expected-range bounds", ok, detail + fmt(", %lld environments", static_cast<long long>(ctx.budget.range_environments)), 0.0};
}

CriterionResult psi_inequality(const Context& ctx) {
  const BoxGeometry box(2, 5);
  const BoxGeometry big(2, 15);
  const Site y = make_site({3, 0});
  const SiteIndex yi = box.index(y);
  const double r = 0.5;
  RunPlan plan;
  plan.experiment_id = "acceptance-psi";
  plan.replicates = ctx.budget.psi_pairs;
  plan.master_seed = ctx.seed(400);
  plan.workers = ctx.opts.workers;
  auto pick = [&](std::uint64_t seed) {
    auto z = static_cast<SiteIndex>(mix64(seed ^ 0x5a5a5a5aULL) % static_cast<std::uint64_t>(box.site_count() - 1));
    return z >= yi ? z + 1 : z;
  };
  const Payloads rows = collect(plan, 3, [&](std::int64_t, std::uint64_t seed, std::span<double> out) {
    const FlipBoundRow row =
        flip_bound_row(sample_environment(box, r, seed), sample_environment(big, r, seed), y, box.site(pick(seed)));
    out[0] = std::abs(row.report.log_ratio);
    out[1] = row.bound_rhs;
    out[2] = row.report.log_ratio == 0.0 ? 0.0 : std::abs(row.report.log_ratio) / row.bound_rhs;
  });
  int violations = 0;
  std::string first;
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    if (rows(i, 0) > rows(i, 1) * (1.0 + 1e-9)) {
      if (violations++ == 0) {
        const std::uint64_t s = stream_seed(plan.master_seed, static_cast<std::uint64_t>(i));
        first = fmt(" first: replicate %lld stream seed %llu z=%s", static_cast<long long>(i),
                    static_cast<unsigned long long>(s), format_site(box.site(pick(s))).c_str());
      }
    }
  }
  return {7, "flip ratio against 4 psi P(H(z)<H(y))", violations == 0 && rows.rows() >= 100,
          fmt("%lld pairs, %d violations, max |log ratio|/rhs %.4f", static_cast<long long>(rows.rows()), violations,
              rows.col(2).maxCoeff()) +
              first,
          0.0};
}

CriterionResult monotone_coupling(const Context& ctx) {
  const BoxGeometry box(2, 5);
  const Site y = make_site({3, 0});
  const SiteIndex start = box.origin(), target = box.index(y);
  RunPlan plan;
  plan.experiment_id = "acceptance-coupling";
  plan.replicates = ctx.budget.coupling_trials;
  plan.master_seed = ctx.seed(500);
  plan.workers = ctx.opts.workers;
  const Payloads rows = collect(plan, 2, [&](std::int64_t, std::uint64_t seed, std::span<double> out) {
    const Environment ep = sample_environment(box, 0.3, seed);
    out[0] = quenched_cost(ep, start, target);
    out[1] = quenched_cost(couple(ep, 0.7), start, target);
  });
  std::int64_t good = 0;
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    if (rows(i, 0) >= rows(i, 1) - 1e-9 * std::max(1.0, std::abs(rows(i, 1)))) ++good;
  }
  return {8, "monotone coupling", good == rows.rows(),
          fmt("%lld / %lld trials with a(omega_0.3) >= a(omega_0.7)", static_cast<long long>(good),
              static_cast<long long>(rows.rows())),
          0.0};
}

CriterionResult lyapunov_sanity(const Context& ctx) {
  ExponentConfig cfg;
  cfg.n_list = {2, 4, 8};
  cfg.replicates = ctx.budget.lyapunov_replicates;
  cfg.seed = ctx.seed(600);
  cfg.workers = ctx.opts.workers;
  const LyapunovPoint pt = estimate_quenched_lyapunov(2, 0.5, 0.0, make_site({1, 0}), cfg);
  bool monotone = true;
  std::string values;
  for (std::size_t i = 0; i < pt.entries.size(); ++i) {
    const auto& e = pt.entries[i];
    values += fmt("%sn=%d %.4f+-%.4f", i ? ", " : "", e.n, e.value, e.std_error);
    if (i > 0) {
      const auto& prev = pt.entries[i - 1];
      monotone = monotone && e.value <= prev.value + 3.0 * std::hypot(e.std_error, prev.std_error);
    }
  }
  const double cap = 1.0 + std::log(4.0);
  const bool inside = pt.extrapolated > 0.0 && pt.extrapolated <= cap;
  return {9, "quenched Lyapunov sanity", monotone && inside,
          values + fmt("; alpha %.4f in (0, %.4f]", pt.extrapolated, cap), 0.0};
}

CriterionResult rate_functions(const Context& ctx) {
  RateSearchConfig cfg;
  cfg.exponent.estimator = Estimator::Exact;
  cfg.exponent.n_list = {2};
  cfg.exponent.workers = ctx.opts.workers;
  cfg.cache = std::make_shared<LyapunovCache>();
  const RateFunctionValue zero = rate_function(1, 0.3, Eigen::VectorXd::Zero(1), ExponentKind::Quenched, cfg);
  const bool zero_ok = zero.value == 0.0 && zero.lambda_star == 0.0;
  Eigen::VectorXd x(1);
  x << 0.5;
  bool search_ok = true;
  double widest = 0.0;
  int most = 0;
  for (double r : {0.3, 0.6}) {
    const RateFunctionValue v = rate_function(1, r, x, ExponentKind::Quenched, cfg);
    widest = std::max(widest, v.hi - v.lo);
    most = std::max(most, v.evaluations);
    search_ok = search_ok && !v.at_bracket_max && v.hi - v.lo <= 1e-6 && v.evaluations <= 60;
  }
  const Eigen::VectorXd xs[] = {x};
  const ExponentKind kinds[] = {ExponentKind::Quenched};
  const BoundReport rep = check_rate_bounds(1, 0.3, 0.6, xs, kinds, cfg);
  double lower_margin = 0.0, transfer_margin = 0.0;
  for (const auto& c : rep.cells) {
    if (c.bound_id == "RATE_LOWER") lower_margin = c.margin;
    if (c.bound_id == "RATE_TRANSFER") transfer_margin = c.margin;
  }
  const bool ok = zero_ok && search_ok && lower_margin >= -1e-8 && transfer_margin >= -1e-8;
  return {10, "rate functions", ok,
          fmt("I(0)=%g; widest bracket %.2e (tol 1e-6) in <= %d evaluations (limit 60); lower margin %.4e, transfer "
              "margin %.2e (floor -1e-8)",
              zero.value, widest, most, lower_margin, transfer_margin),
          0.0};
}

bool same_bits(double a, double b) { return std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b); }

CriterionResult determinism(const Context& ctx) {
  const std::int64_t reps = ctx.budget.determinism_replicates;
  const BoxGeometry box(1, 2);
  const Site y = make_site({2});
  auto fingerprint = [&](int workers) {
    std::vector<double> v;
    AnnealedOptions ao;
    ao.replicates = reps;
    ao.seed = ctx.seed(700);
    ao.workers = workers;
    const auto env = annealed_cost_env_mc(box, 0.5, y, 0.0, ao);
    const auto path = annealed_cost_path_mc(box, 0.5, y, 0.0, ao);
    const auto deriv = annealed_derivative_formula(box, 0.5, y, 0.0, ao);
    v.insert(v.end(), {env.value, env.std_error, path.value, path.std_error, deriv.value, deriv.std_error});
    RussoOptions ro;
    ro.estimator = Estimator::EnvMc;
    ro.replicates = reps / 10;
    ro.seed = ctx.seed(701);
    ro.table.workers = workers;
    const auto russo = russo_rhs(BoxGeometry(2, 2), 0.5, make_site({1, 0}), ro);
    v.insert(v.end(), {russo.value, russo.std_error});
    ExponentConfig cfg;
    cfg.n_list = {1, 2};
    cfg.replicates = reps / 10;
    cfg.seed = ctx.seed(702);
    cfg.workers = workers;
    const auto pt = estimate_annealed_lyapunov(2, 0.5, 0.5, make_site({1, 0}), cfg);
    for (const auto& e : pt.entries) v.insert(v.end(), {e.value, e.std_error});
    cfg.estimator = Estimator::PathMc;
    cfg.replicates = reps;
    const double rs[] = {0.3, 0.7};
    const auto cc = coupled_costs(ExponentKind::Annealed, BoxGeometry(2, 3), make_site({2, 0}), 0.0, rs, cfg);
    v.insert(v.end(), {cc.value[0], cc.value[1], cc.diff_std_error(0, 1)});
    return v;
  };
  const std::vector<double> base = fingerprint(1);
  int mismatches = 0;
  const int counts[] = {2, 3, 8};
  for (int w : counts) {
    const auto other = fingerprint(w);
    for (std::size_t i = 0; i < base.size(); ++i) mismatches += same_bits(base[i], other[i]) ? 0 : 1;
  }
  return {11, "determinism across worker counts", mismatches == 0,
          fmt("%zu quantities compared at 1 vs 2, 3, 8 workers, %d mismatches", base.size(), mismatches), 0.0};
}

CriterionResult performance(const Context& ctx) {
  const BoxGeometry box3(3, 15);
  const Environment env = sample_environment(box3, 0.5, ctx.seed(800));
  SolverOptions so;
  so.tol = 1e-10;
  auto t0 = Clock::now();
  const QuenchedField f = solve_travel_field(env, make_site({5, 0, 0}), 0.0, so);
  const double solve_s = seconds_since(t0);
  AnnealedOptions ao;
  ao.replicates = ctx.budget.perf_replicates;
  ao.seed = ctx.seed(801);
  ao.workers = ctx.opts.workers;
  t0 = Clock::now();
  const CostEstimate c = annealed_cost_env_mc(BoxGeometry(2, 20), 0.5, make_site({10, 0}), 0.0, ao);
  const double mc_s = seconds_since(t0);
  const bool ok = solve_s < 1.0 && mc_s < 300.0 && std::isfinite(c.value) && std::isfinite(f.cost(box3.origin()));
  return {12, "performance floor", ok,
          fmt("d=3 N=15 solve %.3f s (limit 1 s, %lld sweeps); %lld-replicate ENV_MC d=2 N=20 %.1f s on %d workers "
              "(limit 300 s)",
              solve_s, static_cast<long long>(f.iterations()), static_cast<long long>(ao.replicates), mc_s,
              resolve_workers(ctx.opts.workers)),
          0.0};
}

}  // namespace

Profile parse_profile(std::string_view s) {
  if (s == "desk") return Profile::Desk;
  if (s == "smoke") return Profile::Smoke;
  throw ValidationError("profile must be desk or smoke; got '" + std::string(s) + "'");
}

std::string to_string(Profile p) { return p == Profile::Desk ? "desk" : "smoke"; }

std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& opts, std::ostream* log) {
  const Context ctx{opts, budget_for(opts.profile)};
  using Fn = CriterionResult (*)(const Context&);
  static const Fn criteria[] = {closed_forms,     russo_identity,  quenched_lower_bound, derivative_identity,
                                estimator_triangle, range_bounds,  psi_inequality,       monotone_coupling,
                                lyapunov_sanity,  rate_functions,  determinism,          performance};
  static constexpr double kTimeLimits[] = {0, 30, 0, 120, 60, 300, 300, 0, 600, 0, 0, 0};
  std::vector<CriterionResult> out;
  for (int id = 1; id <= 12; ++id) {
    if (!opts.only.empty() && std::find(opts.only.begin(), opts.only.end(), id) == opts.only.end()) continue;
    const auto t0 = Clock::now();
    CriterionResult r;
    try {
      r = criteria[id - 1](ctx);
    } catch (const std::exception& e) {
      r = CriterionResult{id, "criterion " + std::to_string(id), false, std::string("error: ") + e.what(), 0.0};
    }
    r.seconds = seconds_since(t0);
    if (const double limit = kTimeLimits[id - 1]; limit > 0.0 && r.seconds > limit) {
      r.pass = false;
      r.detail += fmt("; runtime over the %.0f s limit", limit);
    }
    if (log) *log << format_result(r) << std::endl;
    out.push_back(std::move(r));
  }
  return out;
}

std::string format_result(const CriterionResult& r) {
  return fmt("%s C%02d %s: %s [%.2f s]", r.pass ? "PASS" : "FAIL", r.id, r.name.c_str(), r.detail.c_str(), r.seconds);
}

}  // namespace rwrp
