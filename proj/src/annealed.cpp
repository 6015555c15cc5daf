#include "rwrp/annealed.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>

#include "rwrp/errors.hpp"
#include "rwrp/mc_driver.hpp"
#include "rwrp/numerics.hpp"

namespace rwrp {

namespace {

void check_r(double r, bool open) {
  const bool ok = open ? (r > 0.0 && r < 1.0) : (r >= 0.0 && r <= 1.0);
  if (!ok) throw ValidationError(std::string("r must lie in ") + (open ? "(0,1)" : "[0,1]") + ", got " + std::to_string(r));
}

CostEstimate make_estimate(Estimator e, const BoxGeometry& box, double r, const Site& y, double lambda) {
  CostEstimate c;
  c.estimator = e;
  c.r = r;
  c.lambda = lambda;
  c.target = y;
  c.dimension = box.dimension();
  c.radius = box.radius();
  return c;
}

RunPlan plan_for(const char* id, const AnnealedOptions& opts) {
  if (opts.replicates < 2) throw ValidationError("Monte Carlo estimators need >= 2 replicates");
  RunPlan plan;
  plan.experiment_id = id;
  plan.replicates = opts.replicates;
  plan.master_seed = opts.seed;
  plan.workers = opts.workers;
  return plan;
}

// Scaled weights for a table: w(mask) e(mask) e^{-M} with M = max log e.
struct ScaledTable {
  double log_shift;
  Eigen::VectorXd e;  // e(mask) * exp(-log_shift)
};

ScaledTable scale(const CostTable& t) {
  const double shift = t.log_e.maxCoeff();
  if (!std::isfinite(shift)) throw NumericalError("every enumerated e_N underflows");
  return ScaledTable{shift, (t.log_e.array() - shift).exp().matrix()};
}

double weighted_sum(const CostTable& t, const Eigen::VectorXd& values, double r) {
  std::vector<double> terms(static_cast<std::size_t>(values.size()));
  for (Eigen::Index m = 0; m < values.size(); ++m) {
    terms[static_cast<std::size_t>(m)] = t.enumerator.weight(static_cast<std::uint64_t>(m), r) * values[m];
  }
  return pairwise_sum(terms);
}

}  // namespace

std::int64_t default_step_cap(const BoxGeometry& box) {
  const auto side = static_cast<std::int64_t>(box.side());
  return 64 * side * side;
}

PathSample simulate_walk(const BoxGeometry& box, SiteIndex start, SiteIndex target, std::mt19937_64& rng,
                         std::int64_t step_cap) {
  thread_local std::vector<int> counts;
  thread_local std::vector<SiteIndex> touched;
  if (counts.size() < static_cast<std::size_t>(box.site_count())) counts.assign(static_cast<std::size_t>(box.site_count()), 0);
  touched.clear();

  const int d = box.dimension();
  const int n = box.radius();
  std::vector<int> x(static_cast<std::size_t>(d));
  for (int a = 0; a < d; ++a) x[static_cast<std::size_t>(a)] = box.coordinate(start, a);
  std::uniform_int_distribution<int> direction(0, 2 * d - 1);

  PathSample s;
  SiteIndex cur = start;
  for (;;) {
    if (cur == target) {
      s.hit = true;
      break;
    }
    if (s.steps >= step_cap) {
      s.capped = true;
      break;
    }
    int& c = counts[static_cast<std::size_t>(cur)];
    if (c++ == 0) touched.push_back(cur);
    ++s.steps;
    const int k = direction(rng);
    const int axis = k / 2;
    const int step = (k % 2 == 0) ? 1 : -1;
    int& xa = x[static_cast<std::size_t>(axis)];
    xa += step;
    if (xa > n || xa < -n) break;  // killed on exit
    cur += step * box.stride(axis);
  }
  s.local_times.reserve(touched.size());
  for (SiteIndex t : touched) {
    s.local_times.emplace_back(t, counts[static_cast<std::size_t>(t)]);
    counts[static_cast<std::size_t>(t)] = 0;
  }
  return s;
}

double path_weight(const PathSample& s, double r, double lambda) {
  if (!s.hit) return 0.0;
  double phi = std::exp(-lambda * static_cast<double>(s.steps));
  for (const auto& [site, l] : s.local_times) phi *= r + (1.0 - r) * std::exp(-static_cast<double>(l));
  return phi;
}

double path_log_derivative(const PathSample& s, double r) {
  double sum = 0.0;
  for (const auto& [site, l] : s.local_times) {
    const double t = std::exp(-static_cast<double>(l));
    sum += (1.0 - t) / (r + t * (1.0 - r));
  }
  return sum;
}

double annealed_cost_from_table(const CostTable& table, double r) {
  const ScaledTable s = scale(table);
  const double mean = weighted_sum(table, s.e, r);
  if (!(mean > 0.0)) throw NumericalError("annealed expectation is zero");
  return -(s.log_shift + std::log(mean));
}

double annealed_derivative_from_table(const CostTable& table, double r) {
  const ScaledTable s = scale(table);
  const int n = table.enumerator.relevant_count();
  Eigen::VectorXd flips(s.e.size());
  for (Eigen::Index m = 0; m < s.e.size(); ++m) {
    const auto mask = static_cast<std::uint64_t>(m);
    double acc = 0.0;
    for (int z = 0; z < n; ++z) {
      const std::uint64_t bit = std::uint64_t{1} << z;
      acc += s.e[static_cast<Eigen::Index>(mask & ~bit)] - s.e[static_cast<Eigen::Index>(mask | bit)];
    }
    flips[m] = acc;
  }
  return weighted_sum(table, flips, r) / weighted_sum(table, s.e, r);
}

double annealed_fd_from_table(const CostTable& table, double r, double h, bool richardson) {
  auto central = [&](double step) {
    return (annealed_cost_from_table(table, r - step) - annealed_cost_from_table(table, r + step)) / (2.0 * step);
  };
  if (!(h > 0.0) || r - h < 0.0 || r + h > 1.0) throw ValidationError("finite-difference step leaves [0,1]");
  if (!richardson) return central(h);
  return (4.0 * central(h / 2.0) - central(h)) / 3.0;
}

CostEstimate annealed_cost_exact(const BoxGeometry& box, double r, const Site& y, double lambda,
                                 const AnnealedOptions& opts) {
  check_r(r, false);
  CostEstimate c = make_estimate(Estimator::Exact, box, r, y, lambda);
  if (box.index(y) == box.origin()) return c;
  const CostTable table = tabulate_costs(box, y, TableOptions{lambda, opts.solver, opts.workers, opts.guard});
  c.value = annealed_cost_from_table(table, r);
  c.replicates = static_cast<std::int64_t>(table.enumerator.size());
  return c;
}

CostEstimate annealed_cost_env_mc(const BoxGeometry& box, double r, const Site& y, double lambda,
                                  const AnnealedOptions& opts) {
  check_r(r, false);
  CostEstimate c = make_estimate(Estimator::EnvMc, box, r, y, lambda);
  c.replicates = opts.replicates;
  const SiteIndex target = box.index(y);
  const SiteIndex start = box.origin();
  if (target == start) return c;
  const Payloads rows = collect(plan_for("annealed-env-mc", opts), 1,
                                [&](std::int64_t, std::uint64_t seed, std::span<double> out) {
                                  const Environment env = sample_environment(box, r, seed);
                                  out[0] = -quenched_cost(env, start, target, lambda, opts.solver);
                                });
  const Eigen::VectorXd log_e = rows.col(0);
  const double shift = log_e.maxCoeff();
  if (!std::isfinite(shift)) throw NumericalError("annealed env MC: every sampled e_N underflows");
  const Eigen::VectorXd e = (log_e.array() - shift).exp().matrix();
  const StreamingStats stats = StreamingStats::pairwise(std::span<const double>(e.data(), static_cast<std::size_t>(e.size())));
  if (!(stats.mean() > 0.0)) throw NumericalError("annealed env MC: sample mean underflows");
  c.value = -(shift + std::log(stats.mean()));
  c.std_error = stats.std_error() / stats.mean();
  return c;
}

CostEstimate annealed_cost_path_mc(const BoxGeometry& box, double r, const Site& y, double lambda,
                                   const AnnealedOptions& opts) {
  check_r(r, false);
  CostEstimate c = make_estimate(Estimator::PathMc, box, r, y, lambda);
  c.replicates = opts.replicates;
  const SiteIndex target = box.index(y);
  const SiteIndex start = box.origin();
  if (target == start) return c;
  const std::int64_t cap = opts.step_cap > 0 ? opts.step_cap : default_step_cap(box);
  const Payloads rows = collect(plan_for("annealed-path-mc", opts), 2,
                                [&](std::int64_t, std::uint64_t seed, std::span<double> out) {
                                  std::mt19937_64 rng(seed);
                                  const PathSample s = simulate_walk(box, start, target, rng, cap);
                                  out[0] = path_weight(s, r, lambda);
                                  out[1] = s.capped ? 1.0 : 0.0;
                                });
  const Eigen::VectorXd phi = rows.col(0);
  c.capped_walks = static_cast<std::int64_t>(rows.col(1).sum());
  const StreamingStats stats = StreamingStats::pairwise(std::span<const double>(phi.data(), static_cast<std::size_t>(phi.size())));
  if (!(stats.max() > 0.0)) {
    throw NumericalError("path MC: no walk hit the target before leaving the box; raise --replicates or shrink the box");
  }
  c.value = -std::log(stats.mean());
  c.std_error = stats.std_error() / stats.mean();
  return c;
}

CostEstimate annealed_cost(Estimator estimator, const BoxGeometry& box, double r, const Site& y, double lambda,
                           const AnnealedOptions& opts) {
  switch (estimator) {
    case Estimator::Exact: return annealed_cost_exact(box, r, y, lambda, opts);
    case Estimator::EnvMc: return annealed_cost_env_mc(box, r, y, lambda, opts);
    case Estimator::PathMc: return annealed_cost_path_mc(box, r, y, lambda, opts);
  }
  throw ValidationError("unknown estimator");
}

Estimate annealed_derivative_formula(const BoxGeometry& box, double r, const Site& y, double lambda,
                                     const AnnealedOptions& opts) {
  check_r(r, true);
  const SiteIndex target = box.index(y);
  const SiteIndex start = box.origin();
  if (target == start) return Estimate{0.0, 0.0, opts.replicates};
  const std::int64_t cap = opts.step_cap > 0 ? opts.step_cap : default_step_cap(box);
  const Payloads rows = collect(plan_for("annealed-derivative-formula", opts), 2,
                                [&](std::int64_t, std::uint64_t seed, std::span<double> out) {
                                  std::mt19937_64 rng(seed);
                                  const PathSample s = simulate_walk(box, start, target, rng, cap);
                                  const double phi = path_weight(s, r, lambda);
                                  out[0] = phi;
                                  out[1] = phi > 0.0 ? phi * path_log_derivative(s, r) : 0.0;
                                });
  if (!(rows.col(0).maxCoeff() > 0.0)) {
    throw NumericalError("derivative formula: no walk hit the target; raise --replicates or shrink the box");
  }
  const RatioEstimate est = jackknife_ratio(rows.col(1), rows.col(0), 50);
  return Estimate{est.value, est.std_error, opts.replicates};
}

double annealed_derivative_flip(const BoxGeometry& box, double r, const Site& y, double lambda,
                                const AnnealedOptions& opts) {
  check_r(r, true);
  if (box.index(y) == box.origin()) return 0.0;
  const CostTable table = tabulate_costs(box, y, TableOptions{lambda, opts.solver, opts.workers, opts.guard});
  return annealed_derivative_from_table(table, r);
}

DerivativeReport derivative_report(const BoxGeometry& box, double r, const Site& y, const DerivativeOptions& opts,
                                   const CostTable* table) {
  DerivativeReport rep;
  rep.r = r;
  const Estimate formula = annealed_derivative_formula(box, r, y, opts.lambda, opts.annealed);
  rep.formula_value = formula.value;
  rep.formula_se = formula.std_error;
  if (opts.exact_sides && box.index(y) != box.origin()) {
    std::optional<CostTable> own;
    if (!table) {
      own.emplace(tabulate_costs(box, y, TableOptions{opts.lambda, opts.annealed.solver, opts.annealed.workers,
                                                      opts.annealed.guard}));
      table = &*own;
    }
    rep.flip_value = annealed_derivative_from_table(*table, r);
    rep.fd_value = annealed_fd_from_table(*table, r, opts.fd_step, opts.richardson);
  }
  std::vector<double> present{rep.formula_value};
  if (rep.flip_value) present.push_back(*rep.flip_value);
  if (rep.fd_value) present.push_back(*rep.fd_value);
  for (std::size_t i = 0; i < present.size(); ++i) {
    for (std::size_t j = i + 1; j < present.size(); ++j) {
      rep.abs_disc = std::max(rep.abs_disc, std::abs(present[i] - present[j]));
    }
  }
  return rep;
}

}  // namespace rwrp
