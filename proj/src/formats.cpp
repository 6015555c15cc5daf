#include "rwrp/formats.hpp"

#include <charconv>
#include <cmath>
#include <ostream>

namespace rwrp {

namespace {

Json real_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

Json optional_real(const std::optional<double>& v) { return v ? real_or_null(*v) : Json(nullptr); }

int dimension_of(const LyapunovPoint& p) { return static_cast<int>(p.direction.size()); }

}  // namespace

std::string format_real(double v) {
  if (std::isnan(v)) return "";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

void write_csv_preamble(std::ostream& os, const Json& config) {
  os << "# rwrp " << kVersion << '\n' << "# config: " << config.dump() << '\n';
}

Json wrap_result(const Json& config, Json result) {
  Json doc;
  doc["version"] = kVersion;
  doc["config"] = config;
  doc["result"] = std::move(result);
  return doc;
}

void write_field_dump(std::ostream& os, const QuenchedField& field) {
  const auto& m = field.mantissa();
  for (Eigen::Index i = 0; i < m.size(); ++i) os << i << ' ' << format_real(m[i]) << '\n';
  os << "log_scale " << format_real(field.log_scale()) << '\n';
  os << "gauge " << format_real(field.gauge()) << '\n';
  os << "anchor " << field.anchor() << '\n';
}

void write_flip_csv(std::ostream& os, std::span<const FlipBoundRow> rows) {
  os << "z_coords,omega_z,log_ratio,psi,hit_prob,bound_rhs\n";
  for (const auto& r : rows) {
    os << csv_field(format_site(r.report.z)) << ',' << r.report.omega_at_z << ',' << format_real(r.report.log_ratio)
       << ',' << format_real(r.psi) << ',' << format_real(r.hit_prob) << ',' << format_real(r.bound_rhs) << '\n';
  }
}

void write_cost_csv(std::ostream& os, std::span<const CostEstimate> rows) {
  os << "r,lambda,value,std_error,replicates,estimator\n";
  for (const auto& c : rows) {
    os << format_real(c.r) << ',' << format_real(c.lambda) << ',' << format_real(c.value) << ','
       << format_real(c.std_error) << ',' << c.replicates << ',' << estimator_tag(c.estimator) << '\n';
  }
}

void write_derivative_csv(std::ostream& os, std::span<const DerivativeReport> rows) {
  os << "r,formula,formula_se,flip,fd,abs_disc\n";
  for (const auto& r : rows) {
    os << format_real(r.r) << ',' << format_real(r.formula_value) << ',' << format_real(r.formula_se) << ','
       << (r.flip_value ? format_real(*r.flip_value) : "") << ',' << (r.fd_value ? format_real(*r.fd_value) : "")
       << ',' << format_real(r.abs_disc) << '\n';
  }
}

void write_lyapunov_csv(std::ostream& os, std::span<const LyapunovPoint> points) {
  os << "kind,d,r,lambda,x,n,N,value,std_error\n";
  for (const auto& p : points) {
    for (const auto& e : p.entries) {
      os << to_string(p.kind) << ',' << dimension_of(p) << ',' << format_real(p.r) << ',' << format_real(p.lambda)
         << ',' << csv_field(format_site(p.direction)) << ',' << e.n << ',' << e.radius << ','
         << format_real(e.value) << ',' << format_real(e.std_error) << '\n';
    }
  }
}

void write_bound_csv(std::ostream& os, const BoundReport& report) {
  os << "bound_id,p,q,x,measured,bound,margin,stderr,verdict\n";
  for (const auto& c : report.cells) {
    os << c.bound_id << ',' << format_real(c.p) << ',' << format_real(c.q) << ',' << csv_field(c.x) << ','
       << format_real(c.measured) << ',' << format_real(c.bound) << ',' << format_real(c.margin) << ','
       << format_real(c.std_error) << ',' << to_string(c.verdict) << '\n';
  }
}

Json to_json(const Site& s) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < s.size(); ++i) a.push_back(s[i]);
  return a;
}

Json to_json(const CostEstimate& c) {
  return Json{{"value", real_or_null(c.value)},
              {"std_error", real_or_null(c.std_error)},
              {"replicates", c.replicates},
              {"estimator", estimator_tag(c.estimator)},
              {"r", c.r},
              {"lambda", c.lambda},
              {"target", to_json(c.target)},
              {"d", c.dimension},
              {"N", c.radius},
              {"capped_walks", c.capped_walks}};
}

Json to_json(const DerivativeReport& r) {
  return Json{{"r", r.r},
              {"formula", real_or_null(r.formula_value)},
              {"formula_se", real_or_null(r.formula_se)},
              {"flip", optional_real(r.flip_value)},
              {"fd", optional_real(r.fd_value)},
              {"abs_disc", real_or_null(r.abs_disc)}};
}

Json to_json(const LyapunovPoint& p) {
  Json entries = Json::array();
  for (const auto& e : p.entries) {
    entries.push_back(Json{{"n", e.n}, {"N", e.radius}, {"value", e.value}, {"std_error", e.std_error}});
  }
  return Json{{"kind", to_string(p.kind)},
              {"d", dimension_of(p)},
              {"r", p.r},
              {"lambda", p.lambda},
              {"direction", to_json(p.direction)},
              {"entries", entries},
              {"extrapolated", p.extrapolated},
              {"extrapolated_se", p.extrapolated_se},
              {"extrapolation_method", p.extrapolation_method},
              {"inverse_n_fit", real_or_null(p.inverse_n_fit)}};
}

Json to_json(const DifferenceRow& r) {
  return Json{{"kind", to_string(r.kind)}, {"direction", to_json(r.direction)},
              {"n", r.n},                  {"N", r.radius},
              {"p", r.p},                  {"q", r.q},
              {"lambda", r.lambda},        {"value_p", r.value_p},
              {"value_q", r.value_q},      {"measured", r.measured},
              {"std_error", r.std_error}};
}

Json to_json(const BoundCell& c) {
  return Json{{"bound_id", c.bound_id},
              {"p", c.p},
              {"q", c.q},
              {"lambda", c.lambda},
              {"x", c.x},
              {"n", c.n},
              {"N", c.radius},
              {"measured", real_or_null(c.measured)},
              {"bound", real_or_null(c.bound)},
              {"margin", real_or_null(c.margin)},
              {"stderr", real_or_null(c.std_error)},
              {"verdict", to_string(c.verdict)}};
}

Json to_json(const BoundReport& r) {
  Json cells = Json::array();
  for (const auto& c : r.cells) cells.push_back(to_json(c));
  return Json{{"cells", cells}, {"any_fail", r.any_fail()}};
}

Json to_json(const RateFunctionValue& v) {
  Json x = Json::array();
  for (Eigen::Index i = 0; i < v.x.size(); ++i) x.push_back(v.x[i]);
  Json traj = Json::array();
  for (const auto& s : v.trajectory) traj.push_back(Json{{"lambda", s.lambda}, {"g", s.g}, {"std_error", s.std_error}});
  return Json{{"kind", to_string(v.kind)},
              {"r", v.r},
              {"x", x},
              {"value", v.value},
              {"std_error", v.std_error},
              {"lambda_star", v.at_bracket_max ? Json("AT_BRACKET_MAX") : Json(v.lambda_star)},
              {"lambda_best", v.lambda_star},
              {"bracket", Json::array({v.lo, v.hi})},
              {"evaluations", v.evaluations},
              {"alpha_at_zero", v.alpha_at_zero},
              {"trajectory", traj}};
}

Json to_json(const FlipBoundRow& r) {
  return Json{{"z", to_json(r.report.z)},         {"omega_z", r.report.omega_at_z},
              {"log_ratio", r.report.log_ratio}, {"psi", real_or_null(r.psi)},
              {"hit_prob", r.hit_prob},           {"bound_rhs", real_or_null(r.bound_rhs)}};
}

}  // namespace rwrp
