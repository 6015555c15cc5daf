#include "rwrp/estimate.hpp"

#include "rwrp/errors.hpp"

namespace rwrp {

std::string to_string(Estimator e) {
  switch (e) {
    case Estimator::Exact: return "exact";
    case Estimator::EnvMc: return "env-mc";
    case Estimator::PathMc: return "path-mc";
  }
  return "?";
}

std::string estimator_tag(Estimator e) {
  switch (e) {
    case Estimator::Exact: return "EXACT_ENUM";
    case Estimator::EnvMc: return "ENV_MC";
    case Estimator::PathMc: return "PATH_MC";
  }
  return "?";
}

Estimator parse_estimator(std::string_view s) {
  if (s == "exact") return Estimator::Exact;
  if (s == "env-mc") return Estimator::EnvMc;
  if (s == "path-mc") return Estimator::PathMc;
  throw ValidationError("estimator must be one of exact, env-mc, path-mc; got '" + std::string(s) + "'");
}

}  // namespace rwrp
