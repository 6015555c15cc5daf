#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <utility>
#include <vector>

#include "rwrp/estimate.hpp"
#include "rwrp/quenched.hpp"

namespace rwrp {

// One killed walk from the start: local times of the sites visited before H(y).
struct PathSample {
  std::vector<std::pair<SiteIndex, int>> local_times;  // in first-visit order, excludes y
  bool hit = false;     // H(y) < exit time and below the step cap
  bool capped = false;
  std::int64_t steps = 0;
};

std::int64_t default_step_cap(const BoxGeometry& box);  // 64 (2N+1)^2

PathSample simulate_walk(const BoxGeometry& box, SiteIndex start, SiteIndex target, std::mt19937_64& rng,
                         std::int64_t step_cap);

// phi(r, S) e^{-lambda H(y)} = prod_z (r + (1-r) e^{-l_z}) e^{-lambda H(y)} 1{hit}.
double path_weight(const PathSample& s, double r, double lambda = 0.0);
// sum_z (1 - e^{-l_z}) / (r + e^{-l_z}(1-r)), so that d/dr phi = phi * this.
double path_log_derivative(const PathSample& s, double r);

struct AnnealedOptions {
  std::int64_t replicates = 10'000;
  std::uint64_t seed = 0;
  int workers = 0;
  SolverOptions solver;
  int guard = kDefaultEnumerationGuard;
  std::int64_t step_cap = 0;  // 0: default_step_cap
};

// b_{r,N}(0,y) with shift lambda, by enumeration, environment MC, or path MC.
CostEstimate annealed_cost_exact(const BoxGeometry& box, double r, const Site& y, double lambda = 0.0,
                                 const AnnealedOptions& opts = {});
CostEstimate annealed_cost_env_mc(const BoxGeometry& box, double r, const Site& y, double lambda = 0.0,
                                  const AnnealedOptions& opts = {});
CostEstimate annealed_cost_path_mc(const BoxGeometry& box, double r, const Site& y, double lambda = 0.0,
                                   const AnnealedOptions& opts = {});
CostEstimate annealed_cost(Estimator estimator, const BoxGeometry& box, double r, const Site& y, double lambda = 0.0,
                           const AnnealedOptions& opts = {});

// Quantities read off an enumerated table of log e_N.
double annealed_cost_from_table(const CostTable& table, double r);
// sum_z E_r[e_N(omega_z^0) - e_N(omega_z^1)] / E_r[e_N]
double annealed_derivative_from_table(const CostTable& table, double r);
// central difference (b(r-h) - b(r+h)) / 2h, optionally Richardson-refined
double annealed_fd_from_table(const CostTable& table, double r, double h = 1e-4, bool richardson = false);

// -(d/dr) b_{r,N}(0,y): ratio estimator E[phi_r]/E[phi] over killed walks.
Estimate annealed_derivative_formula(const BoxGeometry& box, double r, const Site& y, double lambda = 0.0,
                                     const AnnealedOptions& opts = {});
// -(d/dr) b_{r,N}(0,y) by site flips over the enumeration.
double annealed_derivative_flip(const BoxGeometry& box, double r, const Site& y, double lambda = 0.0,
                                const AnnealedOptions& opts = {});

struct DerivativeReport {
  double r = 0.0;
  double formula_value = 0.0;
  double formula_se = 0.0;
  std::optional<double> flip_value;
  std::optional<double> fd_value;
  double abs_disc = 0.0;  // largest pairwise discrepancy among present values
};

struct DerivativeOptions {
  AnnealedOptions annealed;
  double lambda = 0.0;
  double fd_step = 1e-4;
  bool richardson = false;
  bool exact_sides = true;  // flip and fd need the enumeration guard
};

// Pass `table` to reuse one enumeration across an r grid.
DerivativeReport derivative_report(const BoxGeometry& box, double r, const Site& y, const DerivativeOptions& opts = {},
                                   const CostTable* table = nullptr);

}  // namespace rwrp
