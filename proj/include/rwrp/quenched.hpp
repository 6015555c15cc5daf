#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "rwrp/environment.hpp"
#include "rwrp/estimate.hpp"
#include "rwrp/lattice.hpp"

namespace rwrp {

struct SolverOptions {
  double tol = 1e-12;                  // max-norm relative residual
  std::int64_t max_sweeps = 1'000'000;
  double relaxation = 1.0;             // SOR factor; 1 is plain Gauss-Seidel
};

// Solution u of a killed-walk system with absorbing sites. Stored as
//   u(x) = mantissa[x] * exp(log_scale - gauge * |x - anchor|_1),
// where the gauge equals the potential shift so that mantissas stay in range
// for large shifts.
class QuenchedField {
 public:
  QuenchedField(BoxGeometry box, SiteIndex anchor, double shift, double gauge, Eigen::VectorXd mantissa,
                double log_scale, double residual, std::int64_t iterations);

  const BoxGeometry& box() const { return box_; }
  SiteIndex anchor() const { return anchor_; }
  double shift() const { return shift_; }
  double gauge() const { return gauge_; }
  const Eigen::VectorXd& mantissa() const { return mantissa_; }
  double log_scale() const { return log_scale_; }
  double residual() const { return residual_; }
  std::int64_t iterations() const { return iterations_; }

  double log_value(SiteIndex x) const;
  double value(SiteIndex x) const;
  // -log u(x); for a travel field this is a_N(x, y, omega + lambda).
  double cost(SiteIndex x) const { return -log_value(x); }

 private:
  BoxGeometry box_;
  SiteIndex anchor_;
  double shift_;
  double gauge_;
  Eigen::VectorXd mantissa_;
  double log_scale_;
  double residual_;
  std::int64_t iterations_;
};

struct AbsorbingSite {
  SiteIndex site;
  double value;
};

// Solves u(x) = exp(-(omega(x)+lambda)) (2d)^{-1} sum_{x'~x} u(x') off the
// absorbing sites, u = 0 outside the box, by Gauss-Seidel sweeps in index order
// starting from u = 0.
QuenchedField solve_killed_system(const Environment& env, double lambda, std::span<const AbsorbingSite> absorbing,
                                  SiteIndex anchor, const SolverOptions& opts = {});

// u(x) = e_N(x, y, omega + lambda), u(y) = 1.
QuenchedField solve_travel_field(const Environment& env, const Site& y, double lambda = 0.0,
                                 const SolverOptions& opts = {});
QuenchedField solve_travel_field(const Environment& env, SiteIndex y, double lambda = 0.0,
                                 const SolverOptions& opts = {});

// a_N(start, y, omega + lambda); zero without solving when start == y.
double quenched_cost(const Environment& env, SiteIndex start, SiteIndex y, double lambda = 0.0,
                     const SolverOptions& opts = {});

// Path-measure probability P~(H(z) < H(y)) for the walk from start.
double hit_before_probability(const Environment& env, const Site& y, const Site& z, const Site& start,
                              double lambda = 0.0, const SolverOptions& opts = {});
double hit_before_probability(const Environment& env, const QuenchedField& travel, SiteIndex z, SiteIndex start,
                              const SolverOptions& opts = {});

// E~[#A(0,y)] = sum_z P~(H(z) < H(y)) over the box, or over `sites` if given.
double expected_range(const Environment& env, const Site& y, double lambda = 0.0, const SolverOptions& opts = {},
                      std::optional<std::span<const SiteIndex>> sites = std::nullopt);

// Box-restricted return weight (1 - E^z[exp{-sum_{1<=k<H+(z)} omega(S_k)}; H+(z) < T])^{-1}.
double return_weight_psi(const Environment& env, const Site& z, double lambda = 0.0, const SolverOptions& opts = {});
double return_weight_psi(const Environment& env, SiteIndex z, double lambda = 0.0, const SolverOptions& opts = {});

struct FlipRatioReport {
  Site z;
  int omega_at_z;
  double log_ratio;  // log(e_N(0,y,omega_z) / e_N(0,y,omega))
};

FlipRatioReport flip_log_ratio(const Environment& env, const Site& y, const Site& z, double lambda = 0.0,
                               const SolverOptions& opts = {});

// One row of the flip-bound table: |log_ratio| against 4 psi P~(H(z)<H(y)).
// psi_env supplies the (possibly enlarged) box on which psi is computed.
struct FlipBoundRow {
  FlipRatioReport report;
  double psi;
  double hit_prob;
  double bound_rhs;
};

FlipBoundRow flip_bound_row(const Environment& env, const Environment& psi_env, const Site& y, const Site& z,
                            const SolverOptions& opts = {});

// log e_N(start, y, omega + lambda) for every environment over the relevant sites.
struct CostTable {
  EnvironmentEnumerator enumerator;
  Eigen::VectorXd log_e;  // indexed by mask

  // E_r[a_N] and its analytic r-derivative as a polynomial in r.
  double expected_cost(double r) const;
  double expected_cost_derivative(double r) const;
  // Sum_z E_r[a_N(omega_z^1) - a_N(omega_z^0)] read off the table.
  double russo_sum(double r) const;
};

struct TableOptions {
  double lambda = 0.0;
  SolverOptions solver;
  int workers = 0;
  int guard = kDefaultEnumerationGuard;
};

CostTable tabulate_costs(const BoxGeometry& box, const Site& y, const TableOptions& opts = {});

// Sum over z of E_r[ 1{omega(z)=1} log E~[e^{l_z}] - 1{omega(z)=0} log E~[e^{-l_z}] ].
struct RussoOptions {
  Estimator estimator = Estimator::Exact;
  std::int64_t replicates = 100;  // Monte Carlo budget
  std::uint64_t seed = 0;
  TableOptions table;
};

Estimate russo_rhs(const BoxGeometry& box, double r, const Site& y, const RussoOptions& opts = {});

}  // namespace rwrp
