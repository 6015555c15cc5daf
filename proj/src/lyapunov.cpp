#include "rwrp/lyapunov.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <regex>

#include <Eigen/QR>

#include "rwrp/annealed.hpp"
#include "rwrp/errors.hpp"
#include "rwrp/mc_driver.hpp"

namespace rwrp {

std::string to_string(ExponentKind k) { return k == ExponentKind::Quenched ? "QUENCHED" : "ANNEALED"; }

ExponentKind parse_kind(std::string_view s) {
  if (s == "quenched" || s == "QUENCHED") return ExponentKind::Quenched;
  if (s == "annealed" || s == "ANNEALED") return ExponentKind::Annealed;
  throw ValidationError("kind must be quenched or annealed; got '" + std::string(s) + "'");
}

std::string BoxRule::str() const { return std::to_string(scale) + "n+" + std::to_string(offset); }

BoxRule BoxRule::parse(const std::string& s) {
  static const std::regex re(R"(\s*(\d+)\s*\*?\s*n\s*\+\s*(\d+)\s*)");
  std::smatch m;
  if (!std::regex_match(s, m, re)) throw ValidationError("box rule must look like '2n+5'; got '" + s + "'");
  return BoxRule{std::stoi(m[1]), std::stoi(m[2])};
}

bool is_primitive(const Site& x) {
  int g = 0;
  for (Eigen::Index a = 0; a < x.size(); ++a) g = std::gcd(g, std::abs(x[a]));
  return g == 1;
}

namespace {

RunPlan plan_for(const char* id, const ExponentConfig& cfg) {
  if (cfg.replicates < 2) throw ValidationError("Monte Carlo estimators need >= 2 replicates");
  RunPlan plan;
  plan.experiment_id = id;
  plan.replicates = cfg.replicates;
  plan.master_seed = cfg.seed;
  plan.workers = cfg.workers;
  return plan;
}

// value_i = mean of column i; paired standard errors from the raw rows.
CoupledCosts summarize_means(const Payloads& rows) {
  const Eigen::Index k = rows.cols();
  const auto n = static_cast<double>(rows.rows());
  CoupledCosts c;
  c.replicates = rows.rows();
  c.value.resize(k);
  c.std_error.resize(k);
  c.diff_std_error = Eigen::MatrixXd::Zero(k, k);
  for (Eigen::Index i = 0; i < k; ++i) {
    const Eigen::VectorXd col = rows.col(i);
    const auto s = StreamingStats::pairwise(std::span<const double>(col.data(), static_cast<std::size_t>(col.size())));
    c.value[i] = s.mean();
    c.std_error[i] = s.std_error();
    for (Eigen::Index j = 0; j < i; ++j) {
      const Eigen::VectorXd diff = rows.col(i) - rows.col(j);
      const auto sd = StreamingStats::pairwise(std::span<const double>(diff.data(), static_cast<std::size_t>(diff.size())));
      c.diff_std_error(i, j) = c.diff_std_error(j, i) = sd.std_error();
    }
  }
  (void)n;
  return c;
}

// value_i = -log mean of column i (columns hold weights or, if logs, log weights).
CoupledCosts summarize_log_means(Payloads rows, bool columns_are_logs) {
  const Eigen::Index k = rows.cols();
  const auto n = static_cast<double>(rows.rows());
  CoupledCosts c;
  c.replicates = rows.rows();
  c.value.resize(k);
  c.std_error.resize(k);
  c.diff_std_error = Eigen::MatrixXd::Zero(k, k);
  Eigen::MatrixXd influence(rows.rows(), k);
  for (Eigen::Index i = 0; i < k; ++i) {
    Eigen::VectorXd w = rows.col(i);
    double shift = 0.0;
    if (columns_are_logs) {
      shift = w.maxCoeff();
      if (!std::isfinite(shift)) throw NumericalError("every sampled weight underflows");
      w = (w.array() - shift).exp().matrix();
    }
    const auto s = StreamingStats::pairwise(std::span<const double>(w.data(), static_cast<std::size_t>(w.size())));
    if (!(s.mean() > 0.0)) {
      throw NumericalError("all sampled weights are zero (no walk hit the target); raise --replicates or shrink the box");
    }
    c.value[i] = -(shift + std::log(s.mean()));
    c.std_error[i] = s.std_error() / s.mean();
    influence.col(i) = w / s.mean();
  }
  for (Eigen::Index i = 0; i < k; ++i) {
    for (Eigen::Index j = 0; j < i; ++j) {
      const Eigen::VectorXd diff = influence.col(i) - influence.col(j);
      const double mean = diff.mean();
      const double var = (diff.array() - mean).square().sum() / std::max(1.0, n - 1.0);
      c.diff_std_error(i, j) = c.diff_std_error(j, i) = std::sqrt(var / n);
    }
  }
  return c;
}

void check_rs(std::span<const double> rs) {
  if (rs.empty()) throw ValidationError("at least one r is required");
  for (double r : rs) {
    if (!(r >= 0.0 && r <= 1.0)) throw ValidationError("r must lie in [0,1], got " + std::to_string(r));
  }
}

}  // namespace

CoupledCosts coupled_costs(ExponentKind kind, const BoxGeometry& box, const Site& y, double lambda,
                           std::span<const double> rs, const ExponentConfig& cfg) {
  check_rs(rs);
  const auto k = static_cast<Eigen::Index>(rs.size());
  const SiteIndex target = box.index(y);
  const SiteIndex start = box.origin();
  if (target == start) {
    CoupledCosts c;
    c.value = Eigen::VectorXd::Zero(k);
    c.std_error = Eigen::VectorXd::Zero(k);
    c.diff_std_error = Eigen::MatrixXd::Zero(k, k);
    return c;
  }
  switch (cfg.estimator) {
    case Estimator::Exact: {
      const CostTable table = tabulate_costs(box, y, TableOptions{lambda, cfg.solver, cfg.workers, cfg.guard});
      CoupledCosts c;
      c.value.resize(k);
      for (Eigen::Index i = 0; i < k; ++i) {
        const double r = rs[static_cast<std::size_t>(i)];
        c.value[i] = kind == ExponentKind::Quenched ? table.expected_cost(r) : annealed_cost_from_table(table, r);
      }
      c.std_error = Eigen::VectorXd::Zero(k);
      c.diff_std_error = Eigen::MatrixXd::Zero(k, k);
      c.replicates = static_cast<std::int64_t>(table.enumerator.size());
      return c;
    }
    case Estimator::EnvMc: {
      const Payloads rows = collect(plan_for("coupled-env-mc", cfg), static_cast<int>(k),
                                    [&](std::int64_t, std::uint64_t seed, std::span<double> out) {
                                      const Environment base = sample_environment(box, rs[0], seed);
                                      for (std::size_t i = 0; i < rs.size(); ++i) {
                                        const Environment env = i == 0 ? base : couple(base, rs[i]);
                                        out[i] = -quenched_cost(env, start, target, lambda, cfg.solver);
                                      }
                                    });
      if (kind == ExponentKind::Quenched) {
        return summarize_means(-rows);
      }
      return summarize_log_means(rows, true);
    }
    case Estimator::PathMc: {
      if (kind == ExponentKind::Quenched) throw ValidationError("path-mc estimates annealed costs only");
      const std::int64_t cap = cfg.step_cap > 0 ? cfg.step_cap : default_step_cap(box);
      const Payloads rows = collect(plan_for("coupled-path-mc", cfg), static_cast<int>(k),
                                    [&](std::int64_t, std::uint64_t seed, std::span<double> out) {
                                      std::mt19937_64 rng(seed);
                                      const PathSample s = simulate_walk(box, start, target, rng, cap);
                                      for (std::size_t i = 0; i < rs.size(); ++i) out[i] = path_weight(s, rs[i], lambda);
                                    });
      return summarize_log_means(rows, false);
    }
  }
  throw ValidationError("unknown estimator");
}

namespace {

void validate_schedule(const Site& x, const ExponentConfig& cfg) {
  if (cfg.n_list.empty()) throw ValidationError("n_list must not be empty");
  for (std::size_t i = 0; i < cfg.n_list.size(); ++i) {
    if (cfg.n_list[i] < 1) throw ValidationError("n_list entries must be >= 1");
    if (i > 0 && cfg.n_list[i] <= cfg.n_list[i - 1]) throw ValidationError("n_list must be strictly increasing");
    if (cfg.box_rule.radius(cfg.n_list[i], x) < cfg.n_list[i] * linf_norm(x)) {
      throw ValidationError("box rule " + cfg.box_rule.str() + " gives a box smaller than n|x|_inf");
    }
  }
}

double inverse_n_intercept(const std::vector<LyapunovEntry>& entries) {
  if (entries.size() < 2) return entries.empty() ? 0.0 : entries.front().value;
  Eigen::MatrixXd a(static_cast<Eigen::Index>(entries.size()), 2);
  Eigen::VectorXd b(a.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    const auto& e = entries[static_cast<std::size_t>(i)];
    a(i, 0) = 1.0;
    a(i, 1) = 1.0 / e.n;
    b[i] = e.value;
  }
  return a.colPivHouseholderQr().solve(b)[0];
}

}  // namespace

LyapunovPoint estimate_lyapunov(ExponentKind kind, int d, double r, double lambda, const Site& x,
                                const ExponentConfig& cfg) {
  if (x.size() != d) throw ValidationError("direction dimension does not match d");
  if (!(lambda >= 0.0)) throw ValidationError("lambda must be >= 0");
  LyapunovPoint pt;
  pt.kind = kind;
  pt.r = r;
  pt.lambda = lambda;
  pt.direction = x;
  if (l1_norm(x) == 0) return pt;
  if (!is_primitive(x)) throw ValidationError("direction " + format_site(x) + " is not primitive");
  validate_schedule(x, cfg);
  const double rs[] = {r};
  for (int n : cfg.n_list) {
    const int radius = cfg.box_rule.radius(n, x);
    const BoxGeometry box(d, radius);
    const Site y = n * x;
    const CoupledCosts c = coupled_costs(kind, box, y, lambda, rs, cfg);
    pt.entries.push_back(LyapunovEntry{n, radius, c.value[0] / n, c.std_error[0] / n});
  }
  auto best = std::min_element(pt.entries.begin(), pt.entries.end(),
                               [](const auto& a, const auto& b) { return a.value < b.value; });
  pt.extrapolated = best->value;
  pt.extrapolated_se = best->std_error;
  pt.inverse_n_fit = inverse_n_intercept(pt.entries);
  return pt;
}

LyapunovPoint estimate_quenched_lyapunov(int d, double r, double lambda, const Site& x, const ExponentConfig& cfg) {
  return estimate_lyapunov(ExponentKind::Quenched, d, r, lambda, x, cfg);
}

LyapunovPoint estimate_annealed_lyapunov(int d, double r, double lambda, const Site& x, const ExponentConfig& cfg) {
  return estimate_lyapunov(ExponentKind::Annealed, d, r, lambda, x, cfg);
}

std::vector<DifferenceRow> lyapunov_difference_profile(int d, double p, double q, double lambda,
                                                       std::span<const Site> directions, const ExponentConfig& cfg,
                                                       std::span<const ExponentKind> kinds) {
  if (!(p > 0.0 && p <= q && q < 1.0)) throw ValidationError("difference profile needs 0 < p <= q < 1");
  std::vector<DifferenceRow> rows;
  const double rs[] = {p, q};
  for (const Site& x : directions) {
    if (x.size() != d) throw ValidationError("direction dimension does not match d");
    const int l1 = l1_norm(x);
    if (l1 == 0) throw ValidationError("difference profile needs nonzero directions");
    if (!is_primitive(x)) throw ValidationError("direction " + format_site(x) + " is not primitive");
    validate_schedule(x, cfg);
    for (ExponentKind kind : kinds) {
      for (int n : cfg.n_list) {
        const int radius = cfg.box_rule.radius(n, x);
        const CoupledCosts c = coupled_costs(kind, BoxGeometry(d, radius), n * x, lambda, rs, cfg);
        const double scale = 1.0 / (static_cast<double>(n) * l1);
        rows.push_back(DifferenceRow{kind, x, n, radius, p, q, lambda, c.value[0] / n, c.value[1] / n,
                                     (c.value[0] - c.value[1]) * scale, c.diff_std_error(0, 1) * scale});
      }
    }
  }
  return rows;
}

}  // namespace rwrp
