#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include <Eigen/Core>

#include "rwrp/annealed.hpp"
#include "rwrp/lyapunov.hpp"

namespace rwrp {

enum class Verdict { Pass, PassWithinError, Fail, Reported };

std::string to_string(Verdict v);  // PASS | PASS_WITHIN_ERROR | FAIL | REPORTED

// margin >= 0 passes; margin >= -3 std_error or >= -slack passes within error.
Verdict classify(double margin, double std_error, double slack = 0.0);

// One comparison. margin >= 0 means the inequality holds: measured - bound for
// lower bounds, bound - measured for upper bounds.
struct BoundCell {
  std::string bound_id;
  double p = 0.0;
  double q = 0.0;
  double lambda = 0.0;
  std::string x;
  int n = 0;       // distance multiplier; 0 for pre-limit cells
  int radius = 0;  // box radius; 0 when not applicable
  double measured = 0.0;
  double bound = 0.0;  // NaN for REPORTED cells
  double margin = 0.0;
  double std_error = 0.0;
  Verdict verdict = Verdict::Pass;
};

struct BoundReport {
  std::vector<BoundCell> cells;

  bool any_fail() const;
  void append(const BoundReport& other);
};

// (1 + log 2d) / (-log(e^{-1} + (1 - e^{-1}) q)): the log-Lipschitz constant
// for annealed differences over [p, q].
double annealed_log_constant(int d, double q);

// An exact-enumeration cell: a_N or b_N from 0 to y in the box of the given radius.
struct PrelimitTarget {
  int radius;
  Site y;
};

struct BoundsConfig {
  std::vector<double> lambdas{0.0};
  std::vector<PrelimitTarget> exact_targets;
  std::vector<Site> directions;  // Lyapunov-profile cells at the largest n
  ExponentConfig exponent;
  double exact_slack = 1e-10;

  // Annealed derivative per unit distance across r, by the path formula (d >= 3).
  bool derivative_ratio = false;
  std::vector<double> ratio_rs{0.05, 0.1, 0.2, 0.3, 0.5, 0.7, 0.9};
  int ratio_radius = 3;
  AnnealedOptions ratio_options;
  double ratio_limit = 10.0;
};

BoundReport check_quenched_bounds(int d, double p, double q, const BoundsConfig& cfg);
BoundReport check_annealed_bounds(int d, double p, double q, const BoundsConfig& cfg);

// Pre-limit cells from one enumerated table (reusable across a (p, q) grid).
BoundReport quenched_table_cells(const CostTable& table, const Site& y, double p, double q, double lambda,
                                 double slack = 1e-10);
BoundReport annealed_table_cells(const CostTable& table, const Site& y, double p, double q, double lambda,
                                 double slack = 1e-10);

// Thread-safe memo of exponent estimates keyed by everything that determines them.
class LyapunovCache {
 public:
  LyapunovPoint get_or_compute(ExponentKind kind, int d, double r, double lambda, const Site& x,
                               const ExponentConfig& cfg);
  std::size_t size() const;

 private:
  using Key = std::tuple<int, int, double, double, std::vector<int>, std::string, std::uint64_t, std::int64_t, int>;
  mutable std::mutex mutex_;
  std::map<Key, LyapunovPoint> entries_;
};

struct RateSearchConfig {
  ExponentConfig exponent;
  double tol = 1e-6;  // final bracket width
  int max_evaluations = 60;
  double bracket_start = 2.0;
  double bracket_max = 64.0;
  double concavity_sigmas = 3.0;
  std::shared_ptr<LyapunovCache> cache;  // created on demand when null
};

struct RateSample {
  double lambda;
  double g;  // scaled exponent minus lambda
  double std_error;
};

struct RateFunctionValue {
  ExponentKind kind = ExponentKind::Quenched;
  double r = 0.0;
  Eigen::VectorXd x;
  double value = 0.0;
  double std_error = 0.0;
  double lambda_star = 0.0;
  bool at_bracket_max = false;
  double lo = 0.0;
  double hi = 0.0;
  int evaluations = 0;
  double alpha_at_zero = 0.0;  // scaled exponent at lambda = 0
  std::vector<RateSample> trajectory;  // in evaluation order
};

// x = (g/m) v with v primitive and m <= 1000; throws for other x.
struct RationalDirection {
  Site primitive;
  double scale;
};
RationalDirection rational_direction(const Eigen::VectorXd& x);

// sup over lambda >= 0 of exponent(lambda, x) - lambda by golden section.
RateFunctionValue rate_function(int d, double r, const Eigen::VectorXd& x, ExponentKind kind,
                                const RateSearchConfig& cfg);

// Scaled exponent estimate at one lambda, through the cache.
RateSample rate_objective(int d, double r, const Eigen::VectorXd& x, ExponentKind kind, double lambda,
                          const RateSearchConfig& cfg);

BoundReport check_rate_bounds(int d, double p, double q, std::span<const Eigen::VectorXd> xs,
                              std::span<const ExponentKind> kinds, const RateSearchConfig& cfg);

}  // namespace rwrp
