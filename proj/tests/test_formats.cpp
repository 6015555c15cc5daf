#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "rwrp/formats.hpp"

using namespace rwrp;

namespace {

std::string first_data_line(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line[0] != '#') return line;
  }
  return "";
}

}  // namespace

TEST_CASE("real formatting round-trips") {
  for (double v : {0.1, 1.0 / 3.0, 1e-300, -2.5e17}) CHECK(std::stod(format_real(v)) == v);
  CHECK(format_real(std::nan("")).empty());
}

TEST_CASE("csv quoting") {
  CHECK(csv_field("plain") == "plain");
  CHECK(csv_field("(1,0)") == "\"(1,0)\"");
  CHECK(csv_field("a\"b") == "\"a\"\"b\"");
}

TEST_CASE("frozen csv headers") {
  std::ostringstream a, b, c, d, e;
  write_cost_csv(a, std::span<const CostEstimate>{});
  write_derivative_csv(b, std::span<const DerivativeReport>{});
  write_lyapunov_csv(c, std::span<const LyapunovPoint>{});
  write_bound_csv(d, BoundReport{});
  write_flip_csv(e, std::span<const FlipBoundRow>{});
  CHECK(a.str() == "r,lambda,value,std_error,replicates,estimator\n");
  CHECK(b.str() == "r,formula,formula_se,flip,fd,abs_disc\n");
  CHECK(c.str() == "kind,d,r,lambda,x,n,N,value,std_error\n");
  CHECK(d.str() == "bound_id,p,q,x,measured,bound,margin,stderr,verdict\n");
  CHECK(e.str() == "z_coords,omega_z,log_ratio,psi,hit_prob,bound_rhs\n");
}

TEST_CASE("rows carry their values") {
  CostEstimate c;
  c.r = 0.5;
  c.value = 0.9;
  c.replicates = 4;
  c.estimator = Estimator::Exact;
  std::ostringstream os;
  write_cost_csv(os, std::span<const CostEstimate>(&c, 1));
  CHECK(os.str().find("0.5,0,0.9,0,4,EXACT_ENUM\n") != std::string::npos);

  DerivativeReport r;
  r.r = 0.2;
  r.formula_value = 1.5;
  std::ostringstream ds;
  write_derivative_csv(ds, std::span<const DerivativeReport>(&r, 1));
  CHECK(ds.str().find("0.2,1.5,0,,,0\n") != std::string::npos);
}

TEST_CASE("preamble and wrapped documents embed the config and version") {
  const Json cfg{{"d", 2}, {"seed", 7}};
  std::ostringstream os;
  write_csv_preamble(os, cfg);
  CHECK(os.str() == std::string("# rwrp ") + kVersion + "\n# config: {\"d\":2,\"seed\":7}\n");
  const Json doc = wrap_result(cfg, Json{{"b", 1.0}});
  CHECK(doc["version"] == kVersion);
  CHECK(doc["config"]["seed"] == 7);
  CHECK(doc["result"]["b"] == 1.0);
}

TEST_CASE("field dump layout") {
  const BoxGeometry box(1, 1);
  const QuenchedField f = solve_travel_field(Environment::constant(box, 0), make_site({1}));
  std::ostringstream os;
  write_field_dump(os, f);
  const std::string s = os.str();
  CHECK(first_data_line(s).rfind("0 ", 0) == 0);
  CHECK(s.find("\nlog_scale 0\n") != std::string::npos);
  CHECK(s.find("\ngauge 0\n") != std::string::npos);
  CHECK(s.find("\nanchor 2\n") != std::string::npos);
}

TEST_CASE("json for rate values flags the bracket cap") {
  RateFunctionValue v;
  v.x = Eigen::VectorXd::Constant(1, 0.5);
  v.at_bracket_max = true;
  v.lambda_star = 64;
  CHECK(to_json(v)["lambda_star"] == "AT_BRACKET_MAX");
  v.at_bracket_max = false;
  CHECK(to_json(v)["lambda_star"] == 64.0);
}
