// rwrp: command-line front end.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rwrp/acceptance.hpp"
#include "rwrp/annealed.hpp"
#include "rwrp/bounds.hpp"
#include "rwrp/errors.hpp"
#include "rwrp/formats.hpp"
#include "rwrp/lyapunov.hpp"
#include "rwrp/mc_driver.hpp"
#include "rwrp/quenched.hpp"

using namespace rwrp;

namespace {

struct Options {
  std::string command;
  int d = 1;
  int N = 0;
  std::string box_rule = "2n+5";
  std::string r = "0.5";
  double p = 0.3;
  double q = 0.6;
  std::string lambda = "0";
  std::string y;
  std::string direction = "1";
  std::string n_list = "2,4,8";
  std::string estimator;
  std::string kind = "quenched";
  std::string x = "0.5";
  std::int64_t replicates = 1000;
  std::uint64_t seed = 0;
  double tol = 1e-12;
  double sor = 1.0;
  int workers = 0;
  int enum_guard = kDefaultEnumerationGuard;
  std::int64_t checkpoint_every = 0;
  std::string checkpoint_dir = "rwrp-checkpoints";
  std::string out;
  std::string format = "csv";
  std::string config;
  std::string env;
  std::string profile = "desk";
  std::string only;
  bool flips = false;
  int psi_radius = 0;
  bool difference = false;
  bool d3_ratio = false;
  bool richardson = false;
  double fd_step = 1e-4;
  int max_evals = 60;
  double rate_tol = 1e-6;
  std::int64_t step_cap = 0;
};

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) {
    if (!cur.empty()) out.push_back(cur);
  }
  return out;
}

std::string strip(std::string s) {
  std::erase_if(s, [](char c) { return c == '(' || c == ')' || c == ' '; });
  return s;
}

double to_real(const std::string& s, const char* field) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ValidationError(std::string("--") + field + ": '" + s + "' is not a number");
  }
}

int to_int(const std::string& s, const char* field) {
  const double v = to_real(s, field);
  if (v != static_cast<int>(v)) throw ValidationError(std::string("--") + field + ": '" + s + "' is not an integer");
  return static_cast<int>(v);
}

std::vector<double> real_list(const std::string& s, const char* field) {
  std::vector<double> out;
  for (const auto& t : split(strip(s), ',')) out.push_back(to_real(t, field));
  if (out.empty()) throw ValidationError(std::string("--") + field + " is empty");
  return out;
}

Site site_of(const std::string& s, int d, const char* field) {
  const auto parts = split(strip(s), ',');
  if (static_cast<int>(parts.size()) != d) {
    throw ValidationError(std::string("--") + field + " needs " + std::to_string(d) + " coordinates; got '" + s + "'");
  }
  Site v(d);
  for (int i = 0; i < d; ++i) v[i] = to_int(parts[static_cast<std::size_t>(i)], field);
  return v;
}

std::vector<Site> site_list(const std::string& s, int d, const char* field) {
  std::vector<Site> out;
  for (const auto& t : split(s, ';')) out.push_back(site_of(t, d, field));
  return out;
}

Json resolved_config(const Options& o) {
  return Json{{"command", o.command},  {"d", o.d},
              {"N", o.N},              {"box-rule", o.box_rule},
              {"r", o.r},              {"p", o.p},
              {"q", o.q},              {"lambda", o.lambda},
              {"y", o.y},              {"direction", o.direction},
              {"n-list", o.n_list},    {"estimator", o.estimator},
              {"kind", o.kind},        {"x", o.x},
              {"replicates", o.replicates}, {"seed", o.seed},
              {"tol", o.tol},          {"sor", o.sor},
              {"workers", resolve_workers(o.workers)}, {"enum-guard", o.enum_guard},
              {"step-cap", o.step_cap}, {"fd-step", o.fd_step},
              {"richardson", o.richardson}, {"env", o.env},
              {"psi-radius", o.psi_radius}, {"max-evals", o.max_evals},
              {"rate-tol", o.rate_tol}, {"version", kVersion}};
}

class Output {
 public:
  explicit Output(const std::string& path) {
    if (!path.empty()) {
      file_.open(path);
      if (!file_) throw ValidationError("--out: cannot open '" + path + "' for writing");
    }
  }
  std::ostream& stream() { return file_.is_open() ? static_cast<std::ostream&>(file_) : std::cout; }

 private:
  std::ofstream file_;
};

bool want_json(const Options& o) {
  if (o.format == "json") return true;
  if (o.format == "csv") return false;
  throw ValidationError("--format must be csv or json; got '" + o.format + "'");
}

SolverOptions solver_of(const Options& o) {
  if (!(o.tol > 0.0)) throw ValidationError("--tol must be > 0");
  if (!(o.sor > 0.0 && o.sor < 2.0)) throw ValidationError("--sor must lie in (0,2)");
  SolverOptions s;
  s.tol = o.tol;
  s.relaxation = o.sor;
  return s;
}

BoxGeometry box_of(const Options& o) {
  if (o.N <= 0) throw ValidationError("--N is required and must be >= 1");
  return BoxGeometry(o.d, o.N);
}

Estimator estimator_of(const Options& o, Estimator fallback) {
  return o.estimator.empty() ? fallback : parse_estimator(o.estimator);
}

AnnealedOptions annealed_of(const Options& o) {
  AnnealedOptions a;
  a.replicates = o.replicates;
  a.seed = o.seed;
  a.workers = o.workers;
  a.solver = solver_of(o);
  a.guard = o.enum_guard;
  a.step_cap = o.step_cap;
  return a;
}

ExponentConfig exponent_of(const Options& o, Estimator fallback) {
  ExponentConfig c;
  c.n_list.clear();
  for (const auto& t : split(strip(o.n_list), ',')) c.n_list.push_back(to_int(t, "n-list"));
  c.box_rule = BoxRule::parse(o.box_rule);
  c.estimator = estimator_of(o, fallback);
  c.replicates = o.replicates;
  c.seed = o.seed;
  c.workers = o.workers;
  c.solver = solver_of(o);
  c.guard = o.enum_guard;
  c.step_cap = o.step_cap;
  return c;
}

double single(const std::vector<double>& v, const char* field) {
  if (v.size() != 1) throw ValidationError(std::string("--") + field + " takes a single value here");
  return v.front();
}

void emit_json(const Options& o, Json result) {
  Output out(o.out);
  out.stream() << wrap_result(resolved_config(o), std::move(result)).dump(2) << '\n';
}

int cmd_solve(const Options& o) {
  const BoxGeometry box = box_of(o);
  const Environment env = [&] {
    if (o.env.empty()) return sample_environment(box, single(real_list(o.r, "r"), "r"), o.seed);
    std::ifstream f(o.env);
    if (!f) throw ValidationError("--env: cannot open '" + o.env + "'");
    Environment e = read_environment(f);
    if (!(e.box() == box)) throw ValidationError("--env: file box " + e.box().describe() + " differs from --d/--N");
    return e;
  }();
  const Site y = site_of(o.y, o.d, "y");
  const double lambda = single(real_list(o.lambda, "lambda"), "lambda");
  const SolverOptions so = solver_of(o);
  if (o.flips) {
    const Environment psi_env =
        o.psi_radius > o.N
            ? (env.has_uniforms() ? sample_environment(BoxGeometry(o.d, o.psi_radius), *env.parameter_r(), *env.seed())
                                  : throw ValidationError("--psi-radius needs a sampled environment, not --env"))
            : env;
    std::vector<FlipBoundRow> rows;
    const SiteIndex yi = box.index(y);
    for (SiteIndex z = 0; z < box.site_count(); ++z) {
      if (z != yi) rows.push_back(flip_bound_row(env, psi_env, y, box.site(z), so));
    }
    if (want_json(o)) {
      Json a = Json::array();
      for (const auto& r : rows) a.push_back(to_json(r));
      emit_json(o, a);
    } else {
      Output out(o.out);
      write_csv_preamble(out.stream(), resolved_config(o));
      write_flip_csv(out.stream(), rows);
    }
    return 0;
  }
  const QuenchedField f = solve_travel_field(env, y, lambda, so);
  if (want_json(o)) {
    emit_json(o, Json{{"cost", f.cost(box.origin())},
                      {"e", f.value(box.origin())},
                      {"iterations", f.iterations()},
                      {"residual", f.residual()},
                      {"log_scale", f.log_scale()},
                      {"gauge", f.gauge()},
                      {"anchor", to_json(box.site(f.anchor()))}});
  } else {
    Output out(o.out);
    write_csv_preamble(out.stream(), resolved_config(o));
    write_field_dump(out.stream(), f);
  }
  return 0;
}

int cmd_cost(const Options& o) {
  const BoxGeometry box = box_of(o);
  const Site y = site_of(o.y, o.d, "y");
  const auto rs = real_list(o.r, "r");
  const ExponentKind kind = parse_kind(o.kind);
  const Estimator est = estimator_of(o, Estimator::Exact);
  std::vector<CostEstimate> rows;
  for (double lambda : real_list(o.lambda, "lambda")) {
    if (kind == ExponentKind::Quenched) {
      const CoupledCosts c = coupled_costs(kind, box, y, lambda, rs, exponent_of(o, est));
      for (std::size_t i = 0; i < rs.size(); ++i) {
        CostEstimate e;
        e.value = c.value[static_cast<Eigen::Index>(i)];
        e.std_error = c.std_error[static_cast<Eigen::Index>(i)];
        e.replicates = c.replicates;
        e.estimator = est;
        e.r = rs[i];
        e.lambda = lambda;
        e.target = y;
        e.dimension = o.d;
        e.radius = o.N;
        rows.push_back(e);
      }
    } else {
      for (double r : rs) rows.push_back(annealed_cost(est, box, r, y, lambda, annealed_of(o)));
    }
  }
  if (want_json(o)) {
    Json a = Json::array();
    for (const auto& r : rows) a.push_back(to_json(r));
    emit_json(o, Json{{"kind", to_string(kind)}, {"rows", a}});
  } else {
    Output out(o.out);
    write_csv_preamble(out.stream(), resolved_config(o));
    write_cost_csv(out.stream(), rows);
  }
  return 0;
}

int cmd_derivative(const Options& o) {
  const BoxGeometry box = box_of(o);
  const Site y = site_of(o.y, o.d, "y");
  DerivativeOptions dopt;
  dopt.annealed = annealed_of(o);
  dopt.lambda = single(real_list(o.lambda, "lambda"), "lambda");
  dopt.fd_step = o.fd_step;
  dopt.richardson = o.richardson;
  dopt.exact_sides = estimator_of(o, Estimator::Exact) == Estimator::Exact;
  std::optional<CostTable> table;
  if (dopt.exact_sides) table = tabulate_costs(box, y, TableOptions{dopt.lambda, dopt.annealed.solver, o.workers, o.enum_guard});
  std::vector<DerivativeReport> rows;
  for (double r : real_list(o.r, "r")) rows.push_back(derivative_report(box, r, y, dopt, table ? &*table : nullptr));
  if (want_json(o)) {
    Json a = Json::array();
    for (const auto& r : rows) a.push_back(to_json(r));
    emit_json(o, a);
  } else {
    Output out(o.out);
    write_csv_preamble(out.stream(), resolved_config(o));
    write_derivative_csv(out.stream(), rows);
  }
  return 0;
}

int cmd_russo(const Options& o) {
  const BoxGeometry box = box_of(o);
  const Site y = site_of(o.y, o.d, "y");
  const double lambda = single(real_list(o.lambda, "lambda"), "lambda");
  RussoOptions ro;
  ro.estimator = estimator_of(o, Estimator::Exact);
  if (ro.estimator == Estimator::PathMc) throw ValidationError("--estimator: russo supports exact and env-mc");
  ro.replicates = o.replicates;
  ro.seed = o.seed;
  ro.table = TableOptions{lambda, solver_of(o), o.workers, o.enum_guard};
  const CostTable table = tabulate_costs(box, y, ro.table);
  Json rows = Json::array();
  std::ostringstream csv;
  csv << "r,lhs,rhs,rhs_se,rel_diff\n";
  for (double r : real_list(o.r, "r")) {
    const double lhs = -table.expected_cost_derivative(r);
    const Estimate rhs = ro.estimator == Estimator::Exact
                             ? Estimate{table.russo_sum(r), 0.0, static_cast<std::int64_t>(table.enumerator.size())}
                             : russo_rhs(box, r, y, ro);
    const double rel = std::abs(lhs - rhs.value) / std::max(std::abs(lhs), 1e-300);
    rows.push_back(Json{{"r", r}, {"lhs", lhs}, {"rhs", rhs.value}, {"rhs_se", rhs.std_error}, {"rel_diff", rel}});
    csv << format_real(r) << ',' << format_real(lhs) << ',' << format_real(rhs.value) << ','
        << format_real(rhs.std_error) << ',' << format_real(rel) << '\n';
  }
  if (want_json(o)) {
    emit_json(o, rows);
  } else {
    Output out(o.out);
    write_csv_preamble(out.stream(), resolved_config(o));
    out.stream() << csv.str();
  }
  return 0;
}

std::vector<ExponentKind> kinds_of(const std::string& s) {
  if (s == "both") return {ExponentKind::Quenched, ExponentKind::Annealed};
  return {parse_kind(s)};
}

int cmd_lyapunov(const Options& o) {
  const ExponentConfig cfg = exponent_of(o, Estimator::EnvMc);
  const auto kinds = kinds_of(o.kind);
  if (o.difference) {
    const auto dirs = site_list(o.direction, o.d, "direction");
    Json a = Json::array();
    std::ostringstream csv;
    csv << "kind,x,n,N,p,q,lambda,value_p,value_q,measured,std_error\n";
    for (double lambda : real_list(o.lambda, "lambda")) {
      for (const auto& row : lyapunov_difference_profile(o.d, o.p, o.q, lambda, dirs, cfg, kinds)) {
        a.push_back(to_json(row));
        csv << to_string(row.kind) << ',' << csv_field(format_site(row.direction)) << ',' << row.n << ','
            << row.radius << ',' << format_real(row.p) << ',' << format_real(row.q) << ',' << format_real(row.lambda)
            << ',' << format_real(row.value_p) << ',' << format_real(row.value_q) << ',' << format_real(row.measured)
            << ',' << format_real(row.std_error) << '\n';
      }
    }
    if (want_json(o)) {
      emit_json(o, a);
    } else {
      Output out(o.out);
      write_csv_preamble(out.stream(), resolved_config(o));
      out.stream() << csv.str();
    }
    return 0;
  }
  const Site x = site_of(o.direction, o.d, "direction");
  std::vector<LyapunovPoint> pts;
  for (ExponentKind kind : kinds) {
    for (double r : real_list(o.r, "r")) {
      for (double lambda : real_list(o.lambda, "lambda")) pts.push_back(estimate_lyapunov(kind, o.d, r, lambda, x, cfg));
    }
  }
  if (want_json(o)) {
    Json a = Json::array();
    for (const auto& p : pts) a.push_back(to_json(p));
    emit_json(o, a);
  } else {
    Output out(o.out);
    write_csv_preamble(out.stream(), resolved_config(o));
    write_lyapunov_csv(out.stream(), pts);
  }
  return 0;
}

RateSearchConfig rate_config_of(const Options& o) {
  RateSearchConfig rc;
  rc.exponent = exponent_of(o, Estimator::EnvMc);
  rc.tol = o.rate_tol;
  rc.max_evaluations = o.max_evals;
  rc.cache = std::make_shared<LyapunovCache>();
  return rc;
}

std::vector<Eigen::VectorXd> x_list(const Options& o) {
  std::vector<Eigen::VectorXd> out;
  for (const auto& part : split(o.x, ';')) {
    const auto v = real_list(part, "x");
    if (static_cast<int>(v.size()) != o.d) throw ValidationError("--x needs " + std::to_string(o.d) + " coordinates");
    out.push_back(Eigen::Map<const Eigen::VectorXd>(v.data(), o.d));
  }
  return out;
}

int cmd_bounds(const Options& o) {
  BoundReport report;
  if (o.kind == "rate") {
    const auto xs = x_list(o);
    const ExponentKind kinds[] = {ExponentKind::Quenched};
    report = check_rate_bounds(o.d, o.p, o.q, xs, kinds, rate_config_of(o));
  } else {
    BoundsConfig cfg;
    cfg.lambdas = real_list(o.lambda, "lambda");
    if (o.N > 0 && !o.y.empty()) cfg.exact_targets.push_back(PrelimitTarget{o.N, site_of(o.y, o.d, "y")});
    cfg.exponent = exponent_of(o, Estimator::EnvMc);
    if (o.N <= 0 || o.y.empty()) cfg.directions = site_list(o.direction, o.d, "direction");
    cfg.derivative_ratio = o.d3_ratio;
    cfg.ratio_options = annealed_of(o);
    const ExponentKind kind = parse_kind(o.kind);
    report = kind == ExponentKind::Quenched ? check_quenched_bounds(o.d, o.p, o.q, cfg)
                                            : check_annealed_bounds(o.d, o.p, o.q, cfg);
  }
  if (want_json(o)) {
    emit_json(o, to_json(report));
  } else {
    Output out(o.out);
    write_csv_preamble(out.stream(), resolved_config(o));
    write_bound_csv(out.stream(), report);
  }
  return 0;
}

int cmd_rate(const Options& o) {
  const RateSearchConfig rc = rate_config_of(o);
  const ExponentKind kind = parse_kind(o.kind);
  std::vector<RateFunctionValue> vals;
  for (const auto& x : x_list(o)) {
    for (double r : real_list(o.r, "r")) vals.push_back(rate_function(o.d, r, x, kind, rc));
  }
  if (want_json(o)) {
    Json a = Json::array();
    for (const auto& v : vals) a.push_back(to_json(v));
    emit_json(o, a);
  } else {
    Output out(o.out);
    write_csv_preamble(out.stream(), resolved_config(o));
    out.stream() << "kind,r,x,value,std_error,lambda_star,lo,hi,evaluations\n";
    for (const auto& v : vals) {
      const Json j = to_json(v);
      out.stream() << to_string(v.kind) << ',' << format_real(v.r) << ',' << csv_field(j["x"].dump()) << ','
                   << format_real(v.value) << ',' << format_real(v.std_error) << ','
                   << (v.at_bracket_max ? std::string("AT_BRACKET_MAX") : format_real(v.lambda_star)) << ','
                   << format_real(v.lo) << ',' << format_real(v.hi) << ',' << v.evaluations << '\n';
    }
  }
  return 0;
}

int cmd_oracle(const Options& o) {
  const BoxGeometry box = box_of(o);
  const Site y = site_of(o.y, o.d, "y");
  const double r = single(real_list(o.r, "r"), "r");
  const double lambda = single(real_list(o.lambda, "lambda"), "lambda");
  const CostTable table = tabulate_costs(box, y, TableOptions{lambda, solver_of(o), o.workers, o.enum_guard});
  const auto& en = table.enumerator;
  Json relevant = Json::array();
  for (SiteIndex s : en.relevant_sites()) relevant.push_back(to_json(box.site(s)));
  Json envs = Json::array();
  std::ostringstream csv;
  csv << "mask,weight,e,cost\n";
  for (std::uint64_t m = 0; m < en.size(); ++m) {
    Json omega = Json::array();
    for (int i = 0; i < en.relevant_count(); ++i) omega.push_back(static_cast<int>((m >> i) & 1U));
    const double w = en.weight(m, r);
    const double le = table.log_e[static_cast<Eigen::Index>(m)];
    envs.push_back(Json{{"mask", m}, {"omega", omega}, {"weight", w}, {"e", std::exp(le)}, {"cost", -le}});
    csv << m << ',' << format_real(w) << ',' << format_real(std::exp(le)) << ',' << format_real(-le) << '\n';
  }
  const double b = annealed_cost_from_table(table, r);
  const double ea = table.expected_cost(r);
  if (want_json(o)) {
    emit_json(o, Json{{"relevant_sites", relevant}, {"environments", envs}, {"b", b}, {"expected_a", ea}});
  } else {
    Output out(o.out);
    write_csv_preamble(out.stream(), resolved_config(o));
    out.stream() << "# b " << format_real(b) << "\n# expected_a " << format_real(ea) << '\n' << csv.str();
  }
  return 0;
}

int cmd_verify(const Options& o) {
  AcceptanceOptions ao;
  ao.profile = parse_profile(o.profile);
  ao.workers = o.workers;
  if (o.seed != 0) ao.seed = o.seed;
  for (const auto& t : split(strip(o.only), ',')) ao.only.push_back(to_int(t, "only"));
  Output out(o.out);
  const auto results = run_acceptance(ao, &out.stream());
  const bool ok = std::all_of(results.begin(), results.end(), [](const auto& r) { return r.pass; });
  out.stream() << (ok ? "ALL PASS" : "FAILURES PRESENT") << '\n';
  return ok ? 0 : 3;
}

void add_options(CLI::App* sub, Options& o) {
  sub->add_option("--d", o.d, "lattice dimension")->capture_default_str();
  sub->add_option("--N", o.N, "box radius: the box is [-N,N]^d (sites)")->capture_default_str();
  sub->add_option("--box-rule", o.box_rule, "box radius as a function of distance n, e.g. 2n+5")->capture_default_str();
  sub->add_option("--r", o.r, "probability that a site has potential 0; comma list for a grid")->capture_default_str();
  sub->add_option("--p", o.p, "smaller r of a bound pair")->capture_default_str();
  sub->add_option("--q", o.q, "larger r of a bound pair")->capture_default_str();
  sub->add_option("--lambda", o.lambda, "potential shift per step (>= 0); comma list for a grid")->capture_default_str();
  sub->add_option("--y", o.y, "target site, comma-separated coordinates");
  sub->add_option("--direction", o.direction, "lattice direction x; ';' separates several")->capture_default_str();
  sub->add_option("--n-list", o.n_list, "increasing distance multipliers n")->capture_default_str();
  sub->add_option("--estimator", o.estimator, "exact | env-mc | path-mc (default depends on the command)");
  sub->add_option("--kind", o.kind, "quenched | annealed (lyapunov also: both; bounds also: rate)")->capture_default_str();
  sub->add_option("--x", o.x, "real point for rate functions; ';' separates several")->capture_default_str();
  sub->add_option("--replicates", o.replicates, "Monte Carlo replicates (count)")->capture_default_str();
  sub->add_option("--seed", o.seed, "master seed")->capture_default_str();
  sub->add_option("--tol", o.tol, "solver max-norm relative residual")->capture_default_str();
  sub->add_option("--sor", o.sor, "over-relaxation factor in (0,2)")->capture_default_str();
  sub->add_option("--workers", o.workers, "worker threads (0: RWRP_DEFAULT_WORKERS or all cores)")->capture_default_str();
  sub->add_option("--enum-guard", o.enum_guard, "largest number of enumerated sites (2^guard environments)")
      ->capture_default_str();
  sub->add_option("--step-cap", o.step_cap, "path Monte Carlo step cap (0: 64 (2N+1)^2 steps)")->capture_default_str();
  sub->add_option("--checkpoint-every", o.checkpoint_every, "replicates per checkpoint flush (0: off)")
      ->capture_default_str();
  sub->add_option("--checkpoint-dir", o.checkpoint_dir, "directory for checkpoint logs")->capture_default_str();
  sub->add_option("--out", o.out, "output path (default: stdout)");
  sub->add_option("--format", o.format, "csv | json")->capture_default_str();
  sub->add_option("--config", o.config, "JSON file of option values; flags win");
}

// Applies `--config` values as defaults for the chosen subcommand before parsing.
void apply_config_file(CLI::App& app, int argc, char** argv) {
  std::string path;
  std::string command;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (command.empty() && !a.empty() && a[0] != '-') command = a;
    if (a == "--config" && i + 1 < argc) path = argv[i + 1];
    if (a.rfind("--config=", 0) == 0) path = a.substr(9);
  }
  if (path.empty() || command.empty()) return;
  CLI::App* sub = app.get_subcommand(command);
  std::ifstream f(path);
  if (!f) throw ValidationError("--config: cannot open '" + path + "'");
  Json j;
  try {
    j = Json::parse(f);
  } catch (const std::exception& e) {
    throw ValidationError("--config: " + std::string(e.what()));
  }
  if (!j.is_object()) throw ValidationError("--config: top level must be an object");
  for (const auto& [key, value] : j.items()) {
    CLI::Option* opt = sub->get_option_no_throw("--" + key);
    if (!opt) throw ValidationError("--config: unknown field '" + key + "'");
    std::string text;
    if (value.is_string()) {
      text = value.get<std::string>();
    } else if (value.is_array()) {
      for (const auto& e : value) text += (text.empty() ? "" : ",") + (e.is_string() ? e.get<std::string>() : e.dump());
    } else {
      text = value.dump();
    }
    opt->default_val(text);
  }
}

int report_error(const char* category, const std::string& message, int code, Json extra = Json::object()) {
  Json j{{"error", category}, {"message", message}, {"exit_code", code}};
  j.update(extra);
  std::cerr << j.dump() << '\n';
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Random walks in Bernoulli potentials: travel costs, Lyapunov exponents and bound checks"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  Options o;
  struct Command {
    const char* name;
    const char* help;
    int (*run)(const Options&);
  };
  const Command commands[] = {
      {"solve", "solve one quenched travel field (or a flip table with --flips)", cmd_solve},
      {"cost", "quenched or annealed travel cost", cmd_cost},
      {"derivative", "annealed r-derivative: path formula, site flips, finite difference", cmd_derivative},
      {"russo", "two sides of the Russo identity for the expected quenched cost", cmd_russo},
      {"lyapunov", "Lyapunov exponent estimate, or coupled differences with --difference", cmd_lyapunov},
      {"bounds", "bound report for --kind quenched, annealed or rate", cmd_bounds},
      {"rate", "rate function sup over lambda of exponent(lambda, x) - lambda", cmd_rate},
      {"oracle", "exact enumeration dump", cmd_oracle},
      {"verify", "run the acceptance suite", cmd_verify},
  };
  std::map<std::string, int (*)(const Options&)> dispatch;
  for (const auto& c : commands) {
    CLI::App* sub = app.add_subcommand(c.name, c.help);
    add_options(sub, o);
    dispatch[c.name] = c.run;
    const std::string name = c.name;
    if (name == "solve") {
      sub->add_option("--env", o.env, "environment file instead of sampling");
      sub->add_flag("--flips", o.flips, "emit the flip-ratio table over all z");
      sub->add_option("--psi-radius", o.psi_radius, "box radius for psi in the flip table (0: N)")->capture_default_str();
    } else if (name == "derivative") {
      sub->add_option("--fd-step", o.fd_step, "finite-difference step in r")->capture_default_str();
      sub->add_flag("--richardson", o.richardson, "Richardson-refine the finite difference");
    } else if (name == "lyapunov") {
      sub->add_flag("--difference", o.difference, "coupled (p,q) difference profile");
    } else if (name == "bounds") {
      sub->add_flag("--d3-ratio", o.d3_ratio, "add the derivative-ratio boundedness cell");
      sub->add_option("--max-evals", o.max_evals, "rate search evaluation budget")->capture_default_str();
      sub->add_option("--rate-tol", o.rate_tol, "rate search bracket tolerance in lambda")->capture_default_str();
    } else if (name == "rate") {
      sub->add_option("--max-evals", o.max_evals, "evaluation budget")->capture_default_str();
      sub->add_option("--rate-tol", o.rate_tol, "bracket tolerance in lambda")->capture_default_str();
    } else if (name == "verify") {
      sub->add_option("--profile", o.profile, "desk | smoke")->capture_default_str();
      sub->add_option("--only", o.only, "comma list of criterion ids");
    }
  }
  try {
    apply_config_file(app, argc, argv);
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error("validation", e.what(), 1);
  } catch (const ValidationError& e) {
    return report_error("validation", e.what(), 1);
  }
  o.command = app.get_subcommands().front()->get_name();
  try {
    set_checkpoint_policy(CheckpointPolicy{o.checkpoint_dir, o.checkpoint_every});
    return dispatch.at(o.command)(o);
  } catch (const ReplicateError& e) {
    return report_error("numerical", e.what(), 2, Json{{"replicate_index", e.index()}, {"stream_seed", e.stream_seed()}});
  } catch (const ConvergenceError& e) {
    return report_error("numerical", e.what(), 2, Json{{"last_residual", e.last_residual()}, {"iterations", e.iterations()}});
  } catch (const NumericalError& e) {
    return report_error("numerical", e.what(), 2);
  } catch (const ValidationError& e) {
    return report_error("validation", e.what(), 1);
  } catch (const std::exception& e) {
    return report_error("internal", e.what(), 2);
  }
}
