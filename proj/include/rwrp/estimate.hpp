#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "rwrp/lattice.hpp"

namespace rwrp {

enum class Estimator { Exact, EnvMc, PathMc };

std::string to_string(Estimator e);          // exact | env-mc | path-mc
std::string estimator_tag(Estimator e);      // EXACT_ENUM | ENV_MC | PATH_MC
Estimator parse_estimator(std::string_view s);

// A value with its Monte Carlo standard error (0 for exact results).
struct Estimate {
  double value = 0.0;
  double std_error = 0.0;
  std::int64_t replicates = 0;
};

// A travel cost, i.e. minus the log of an expectation.
struct CostEstimate {
  double value = 0.0;
  double std_error = 0.0;
  std::int64_t replicates = 0;
  Estimator estimator = Estimator::Exact;
  double r = 0.0;
  double lambda = 0.0;
  Site target;
  int dimension = 0;
  int radius = 0;
  std::int64_t capped_walks = 0;  // path MC only
};

}  // namespace rwrp
