#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "rwrp/environment.hpp"
#include "rwrp/estimate.hpp"
#include "rwrp/quenched.hpp"

namespace rwrp {

enum class ExponentKind { Quenched, Annealed };

std::string to_string(ExponentKind k);  // QUENCHED | ANNEALED
ExponentKind parse_kind(std::string_view s);

// Box radius as a function of the distance n: N(n) = scale * n * |x|_inf + offset.
struct BoxRule {
  int scale = 2;
  int offset = 5;

  int radius(int n, const Site& x) const { return scale * n * linf_norm(x) + offset; }
  std::string str() const;  // "2n+5"
  static BoxRule parse(const std::string& s);
};

struct ExponentConfig {
  std::vector<int> n_list{2, 4, 8};
  BoxRule box_rule;
  Estimator estimator = Estimator::EnvMc;
  std::int64_t replicates = 100;
  std::uint64_t seed = 0;
  int workers = 0;
  SolverOptions solver;
  int guard = kDefaultEnumerationGuard;
  std::int64_t step_cap = 0;
};

// Costs a_N or b_N from 0 to y at several r, all from shared randomness:
// environments thresholded from the same uniforms, or the same walks.
struct CoupledCosts {
  Eigen::VectorXd value;
  Eigen::VectorXd std_error;
  Eigen::MatrixXd diff_std_error;  // standard error of value[i] - value[j]
  std::int64_t replicates = 0;
};

CoupledCosts coupled_costs(ExponentKind kind, const BoxGeometry& box, const Site& y, double lambda,
                           std::span<const double> rs, const ExponentConfig& cfg);

struct LyapunovEntry {
  int n;
  int radius;
  double value;      // cost / n
  double std_error;
};

struct LyapunovPoint {
  ExponentKind kind = ExponentKind::Quenched;
  double r = 0.0;
  double lambda = 0.0;
  Site direction;
  std::vector<LyapunovEntry> entries;
  double extrapolated = 0.0;     // running minimum over n
  double extrapolated_se = 0.0;
  std::string extrapolation_method = "running-min";
  double inverse_n_fit = 0.0;    // intercept of value ~ A + B/n; diagnostic only
};

LyapunovPoint estimate_quenched_lyapunov(int d, double r, double lambda, const Site& x, const ExponentConfig& cfg);
LyapunovPoint estimate_annealed_lyapunov(int d, double r, double lambda, const Site& x, const ExponentConfig& cfg);
LyapunovPoint estimate_lyapunov(ExponentKind kind, int d, double r, double lambda, const Site& x,
                                const ExponentConfig& cfg);

struct DifferenceRow {
  ExponentKind kind;
  Site direction;
  int n;
  int radius;
  double p;
  double q;
  double lambda;
  double value_p;   // cost / n at p
  double value_q;
  double measured;  // (value_p - value_q) / |x|_1
  double std_error;
};

// Per direction and n: coupled (alpha_p - alpha_q)/|x|_1 and (beta_p - beta_q)/|x|_1.
std::vector<DifferenceRow> lyapunov_difference_profile(int d, double p, double q, double lambda,
                                                       std::span<const Site> directions, const ExponentConfig& cfg,
                                                       std::span<const ExponentKind> kinds);

// gcd of the absolute coordinates is 1.
bool is_primitive(const Site& x);

}  // namespace rwrp
