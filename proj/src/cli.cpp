#include "fracpq/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "fracpq/eigsolve.hpp"
#include "fracpq/errors.hpp"
#include "fracpq/nehari.hpp"

namespace fracpq::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// ---------------------------------------------------------------- parsing

[[noreturn]] void bad(const std::string& field, const std::string& msg) {
  throw ValidationError(field + ": " + msg);
}

void reject_unknown(const json& obj, const std::string& path,
                    std::initializer_list<const char*> known) {
  for (const auto& item : obj.items()) {
    const std::string& key = item.key();
    const bool ok = std::any_of(known.begin(), known.end(), [&](const char* k) { return key == k; });
    if (!ok) bad(path.empty() ? key : path + "." + key, "unknown field");
  }
}

const json* child(const json& obj, const char* key) {
  const auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

const json& object(const json& v, const std::string& field) {
  if (!v.is_object()) bad(field, "expected an object");
  return v;
}

double number(const json& v, const std::string& field) {
  if (!v.is_number()) bad(field, "expected a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) bad(field, "expected a finite number");
  return x;
}

int integer(const json& v, const std::string& field) {
  if (!v.is_number_integer()) bad(field, "expected an integer");
  return v.get<int>();
}

std::string text(const json& v, const std::string& field) {
  if (!v.is_string()) bad(field, "expected a string");
  return v.get<std::string>();
}

std::vector<double> numbers(const json& v, const std::string& field) {
  if (!v.is_array() || v.empty()) bad(field, "expected a non-empty array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(number(v[i], field + "[" + std::to_string(i) + "]"));
  return out;
}

std::vector<Interval> intervals(const json& v, const std::string& field) {
  if (!v.is_array() || v.empty()) bad(field, "domain is empty: expected a non-empty list of [lo, hi] pairs");
  std::vector<Interval> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const std::string f = field + "[" + std::to_string(i) + "]";
    if (!v[i].is_array() || v[i].size() != 2) bad(f, "expected a [lo, hi] pair");
    out.push_back({number(v[i][0], f + "[0]"), number(v[i][1], f + "[1]")});
  }
  try {
    Domain1D check(out);
  } catch (const ValidationError& e) {
    bad(field, e.what());
  }
  return out;
}

void require_increasing(const std::vector<double>& g, const std::string& field) {
  for (std::size_t i = 1; i < g.size(); ++i)
    if (!(g[i] > g[i - 1])) bad(field, "grid must be strictly increasing");
}

void require_s_grid(const std::vector<double>& g, const std::string& field) {
  require_increasing(g, field);
  for (double s : g)
    if (!(s > 0.0 && s < 1.0)) bad(field, "every s must lie in (0, 1)");
}

MeshCoupling mesh_rule(const json& v, const std::string& field, MeshCoupling rule) {
  object(v, field);
  reject_unknown(v, field, {"n_per_unit", "coupling"});
  const json* n = child(v, "n_per_unit");
  const json* c = child(v, "coupling");
  if (n && c) bad(field, "give either n_per_unit or coupling, not both");
  if (n) {
    rule.coupled = false;
    rule.n_per_unit = integer(*n, field + ".n_per_unit");
    if (rule.n_per_unit < 4) bad(field + ".n_per_unit", "must be at least 4");
  }
  if (c) {
    const std::string f = field + ".coupling";
    object(*c, f);
    reject_unknown(*c, f, {"scale", "power", "min_n", "max_n"});
    rule.coupled = true;
    if (const json* x = child(*c, "scale")) rule.scale = number(*x, f + ".scale");
    if (const json* x = child(*c, "power")) rule.power = number(*x, f + ".power");
    if (const json* x = child(*c, "min_n")) rule.min_n = integer(*x, f + ".min_n");
    if (const json* x = child(*c, "max_n")) rule.max_n = integer(*x, f + ".max_n");
    if (!(rule.scale > 0.0)) bad(f + ".scale", "must be positive");
    if (!(rule.power > 0.0)) bad(f + ".power", "must be positive");
    if (rule.min_n < 4) bad(f + ".min_n", "must be at least 4");
    if (rule.max_n < rule.min_n) bad(f + ".max_n", "must be at least min_n");
  }
  return rule;
}

LambdaSpec lambda_spec(const json& section, const std::string& field, LambdaSpec spec) {
  const json* v = child(section, "lambda");
  const json* f = child(section, "lambda_factor");
  if (v && f) bad(field, "give either lambda or lambda_factor, not both");
  if (v) spec = {number(*v, field + ".lambda"), std::nullopt};
  if (f) {
    spec = {std::nullopt, number(*f, field + ".lambda_factor")};
    if (!(*spec.factor > 0.0)) bad(field + ".lambda_factor", "must be positive");
  }
  return spec;
}

PotentialSpec potential(const json& v, const std::string& field) {
  object(v, field);
  reject_unknown(v, field, {"kind", "value", "name", "center", "width", "values"});
  PotentialSpec p;
  if (const json* k = child(v, "kind")) p.kind = text(*k, field + ".kind");
  if (p.kind == "constant") {
    if (const json* x = child(v, "value")) p.value = number(*x, field + ".value");
    if (!(p.value > 0.0)) bad(field + ".value", "a constant potential must be positive somewhere");
  } else if (p.kind == "catalog") {
    const json* n = child(v, "name");
    if (!n) bad(field + ".name", "missing catalog id (one, sign_step, gaussian_bump)");
    p.name = text(*n, field + ".name");
    if (p.name != "one" && p.name != "sign_step" && p.name != "gaussian_bump")
      bad(field + ".name", "unknown catalog id '" + p.name + "' (one, sign_step, gaussian_bump)");
    if (const json* x = child(v, "center")) p.center = number(*x, field + ".center");
    if (const json* x = child(v, "width")) p.width = number(*x, field + ".width");
    if (!(p.width > 0.0)) bad(field + ".width", "must be positive");
  } else if (p.kind == "nodal") {
    const json* x = child(v, "values");
    if (!x) bad(field + ".values", "missing nodal table");
    p.values = numbers(*x, field + ".values");
  } else {
    bad(field + ".kind", "unknown potential kind '" + p.kind + "' (constant, catalog, nodal)");
  }
  return p;
}

std::function<double(double)> potential_profile(const PotentialSpec& spec, const std::vector<Interval>& domain) {
  const double mid = 0.5 * (domain.front().lo + domain.back().hi);
  if (spec.kind == "constant") return [v = spec.value](double) { return v; };
  if (spec.kind == "catalog") {
    if (spec.name == "one") return [](double) { return 1.0; };
    if (spec.name == "sign_step") return [mid](double x) { return x < mid ? 1.0 : -1.0; };
    return [c = spec.center, w = spec.width](double x) { return std::exp(-0.5 * (x - c) * (x - c) / (w * w)); };
  }
  throw ValidationError("potential: nodal tables are tied to one mesh and cannot be resampled");
}

// ---------------------------------------------------------------- output

std::string fmt17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string fmt(const char* spec, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, x);
  return buf;
}

class CsvWriter {
 public:
  CsvWriter(const fs::path& path, const std::vector<std::string>& header)
      : enabled_(path.has_parent_path()) {
    if (!enabled_) return;
    os_.open(path, std::ios::binary | std::ios::trunc);
    if (!os_) throw std::runtime_error("cannot write " + path.string());
    for (std::size_t i = 0; i < header.size(); ++i) os_ << (i ? "," : "") << header[i];
    os_ << '\n';
  }
  void row(const std::vector<double>& values) {
    if (!enabled_) return;
    for (std::size_t i = 0; i < values.size(); ++i) os_ << (i ? "," : "") << fmt17(values[i]);
    os_ << '\n';
  }

 private:
  bool enabled_;
  std::ofstream os_;
};

void write_function(const fs::path& path, const NodalFunction& u) {
  CsvWriter w(path, {"x", "u"});
  for (std::size_t i = 0; i < u.size(); ++i)
    w.row({u.mesh->nodes()[i], u.values[static_cast<Eigen::Index>(i)]});
}

void write_trace(const fs::path& path, const std::vector<TraceRow>& trace, const char* value_name) {
  CsvWriter w(path, {"iter", value_name, "residual"});
  for (const auto& r : trace) w.row({static_cast<double>(r.iteration), r.quotient, r.residual});
}

void write_sweep(const fs::path& path, const SweepResult& sweep) {
  std::vector<std::string> header = sweep.columns;
  header.push_back("flagged");
  CsvWriter w(path, header);
  for (std::size_t k = 0; k < sweep.rows.size(); ++k) {
    std::vector<double> row = sweep.rows[k];
    row.push_back(sweep.flagged[k] ? 1.0 : 0.0);
    w.row(row);
  }
}

json sweep_json(const SweepResult& sweep) {
  json j;
  j["parameter"] = sweep.parameter;
  j["columns"] = sweep.columns;
  json rows = json::array();
  for (const auto& r : sweep.rows) {
    json row = json::array();
    for (double v : r) row.push_back(std::isfinite(v) ? json(v) : json(nullptr));
    rows.push_back(row);
  }
  j["rows"] = rows;
  j["flagged"] = sweep.flagged;
  j["fitted_exponent"] = sweep.fitted_exponent ? json(*sweep.fitted_exponent) : json(nullptr);
  j["notes"] = sweep.notes;
  return j;
}

json certificate_json(const CertificateReport& c) {
  return {{"lambda", c.lambda},     {"trials", c.trials},       {"passes", c.passes},
          {"failures", c.failures}, {"rejected", c.rejected},   {"max_ratio", c.max_ratio},
          {"pass", c.pass}};
}

std::string yes(bool b) { return b ? "yes" : "no"; }

std::string num(const json& v) { return v.is_number() ? fmt17(v.get<double>()) : std::string("nan"); }

// ---------------------------------------------------------------- running

struct Outcome {
  json results = json::object();
  bool converged = true;
};

struct Setup {
  Domain1D domain;
  MeshPtr mesh;
  Potential V;
  EnergyBundle b0;  // mu = 0 problem
};

Setup setup(const RunConfig& cfg) {
  Domain1D domain(cfg.domain);
  const MeshPtr mesh = build_mesh(domain, cfg.mesh.resolve(cfg.params.s));
  Potential V = make_potential(cfg.potential, mesh);
  ProblemParams p0 = cfg.params;
  p0.mu = 0.0;
  EnergyBundle b0 = make_bundle(mesh, p0, V);
  return {std::move(domain), mesh, std::move(V), std::move(b0)};
}

double resolve_lambda(const LambdaSpec& spec, double lambda1) {
  return spec.value ? *spec.value : *spec.factor * lambda1;
}

json mesh_json(const Mesh& mesh) {
  return {{"nodes", mesh.size()}, {"h", mesh.h()}};
}

json eigen_json(const EigenReport& r) {
  json j{{"lambda", r.lambda_est},   {"residual", r.residual}, {"iterations", r.iterations},
         {"converged", r.converged}, {"sign", to_string(r.sign)}, {"component_mins", r.component_mins}};
  if (r.path_max) j["path_max"] = *r.path_max;
  return j;
}

Outcome do_lambda1(const RunConfig& cfg, const fs::path& dir) {
  const Setup st = setup(cfg);
  const EigenReport r = lambda1(st.b0, cfg.tol, cfg.max_iter, cfg.seed);
  write_function(dir / "eigenfunction.csv", r.eigenfunction);
  write_trace(dir / "trace.csv", r.trace, "quotient");
  Outcome o;
  o.results["mesh"] = mesh_json(*st.mesh);
  o.results["lambda1"] = eigen_json(r);
  o.results["subcritical"] = cfg.params.subcritical();
  o.converged = r.converged;
  return o;
}

Outcome do_lambda2(const RunConfig& cfg, const fs::path& dir) {
  const Setup st = setup(cfg);
  const EigenReport r1 = lambda1(st.b0, cfg.tol, cfg.max_iter, cfg.seed);
  const EigenReport r2 = lambda2_minimax(st.b0, cfg.tol, cfg.seed, cfg.max_iter);
  write_function(dir / "eigenfunction.csv", r2.eigenfunction);
  write_trace(dir / "trace.csv", r2.trace, "quotient");
  const PathProfile prof = odd_path_profile(st.b0, r2.eigenfunction.values);
  CsvWriter w(dir / "path_profile.csv", {"theta", "value"});
  for (std::size_t k = 0; k < prof.theta.size(); ++k) w.row({prof.theta[k], prof.value[k]});
  Outcome o;
  o.results["mesh"] = mesh_json(*st.mesh);
  o.results["lambda1"] = eigen_json(r1);
  o.results["lambda2"] = eigen_json(r2);
  o.results["gap"] = r2.lambda_est - r1.lambda_est;
  // lambda2 is validated only for V >= 0.
  o.results["experimental"] = !st.V.nonnegative();
  o.converged = r1.converged && r2.converged;
  return o;
}

Outcome do_oracle(const RunConfig& cfg, const fs::path& dir) {
  if (cfg.params.p != 2.0) throw ValidationError("params.p: the linear oracle needs p = 2");
  const Setup st = setup(cfg);
  const auto modes = linear_oracle(st.mesh, cfg.params.s, st.V);
  {
    CsvWriter w(dir / "eigenvalues.csv", {"index", "lambda"});
    for (std::size_t k = 0; k < modes.size(); ++k) w.row({static_cast<double>(k + 1), modes[k].lambda});
  }
  const std::size_t shown = std::min<std::size_t>(modes.size(), 4);
  std::vector<std::string> header{"x"};
  for (std::size_t k = 0; k < shown; ++k) header.push_back("u" + std::to_string(k + 1));
  CsvWriter w(dir / "modes.csv", header);
  for (std::size_t i = 0; i < st.mesh->size(); ++i) {
    std::vector<double> row{st.mesh->nodes()[i]};
    for (std::size_t k = 0; k < shown; ++k) row.push_back(modes[k].u.values[static_cast<Eigen::Index>(i)]);
    w.row(row);
  }
  Outcome o;
  o.results["mesh"] = mesh_json(*st.mesh);
  json ev = json::array();
  for (std::size_t k = 0; k < std::min<std::size_t>(modes.size(), 8); ++k) ev.push_back(modes[k].lambda);
  o.results["eigenvalues"] = ev;
  o.results["mode_count"] = modes.size();
  return o;
}

Outcome do_nehari(const RunConfig& cfg, const fs::path& dir) {
  if (!(cfg.params.mu > 0.0)) throw ValidationError("params.mu: the Nehari solve needs mu > 0");
  const Setup st = setup(cfg);
  const EigenReport ground = lambda1(st.b0, std::min(cfg.tol, 1e-10), cfg.max_iter, cfg.seed);
  const double lambda = resolve_lambda(cfg.nehari_lambda, ground.lambda_est);
  const EnergyBundle bq = with_mu(st.b0, cfg.params.mu);
  const NehariReport r = solve_m_lambda(bq, lambda, cfg.tol, cfg.seed, &ground, cfg.max_iter);
  write_function(dir / "minimizer.csv", r.minimizer);
  write_trace(dir / "trace.csv", r.trace, "energy");
  Outcome o;
  o.results["mesh"] = mesh_json(*st.mesh);
  o.results["nehari"] = {{"lambda", r.lambda},
                         {"lambda1", r.lambda1},
                         {"m_lambda", r.m_lambda},
                         {"nehari_residual", r.nehari_residual},
                         {"energy_identity_defect", r.energy_identity_defect},
                         {"eigen_residual", r.eigen_residual},
                         {"sign", to_string(r.sign)},
                         {"positive", r.positive},
                         {"iterations", r.iterations},
                         {"converged", r.converged}};
  o.converged = r.converged;
  return o;
}

Outcome do_certify(const RunConfig& cfg, const fs::path&) {
  const Setup st = setup(cfg);
  const EigenReport ground = lambda1(st.b0, std::min(cfg.tol, 1e-10), cfg.max_iter, cfg.seed);
  const double lambda = resolve_lambda(cfg.certify_lambda, ground.lambda_est);
  const CertificateReport c = nonexistence_certificate(st.b0, lambda, cfg.certify_trials, cfg.seed);
  const CertificateReport seeded =
      nonexistence_certificate(st.b0, lambda, cfg.certify_trials, cfg.seed, &ground.eigenfunction);
  Outcome o;
  o.results["mesh"] = mesh_json(*st.mesh);
  o.results["lambda1"] = ground.lambda_est;
  o.results["certificate"] = certificate_json(c);
  o.results["seeded_certificate"] = certificate_json(seeded);
  o.converged = ground.converged;
  return o;
}

Outcome do_mu_sweep(const RunConfig& cfg, const fs::path& dir) {
  const Setup st = setup(cfg);
  SweepOptions opt{cfg.tol, cfg.max_iter, cfg.seed, cfg.workers};
  const EigenReport ground = lambda1(st.b0, std::min(cfg.tol, 1e-10), cfg.max_iter, cfg.seed);
  const double lambda = resolve_lambda(cfg.mu_sweep_lambda, ground.lambda_est);
  const SweepResult sweep = mu_sweep(st.b0, lambda, cfg.mu_grid, opt);
  write_sweep(dir / "sweep.csv", sweep);
  const double mu = cfg.params.mu > 0.0 ? cfg.params.mu : cfg.mu_grid.front();
  const SweepResult decay = mu_quotient_decay(with_mu(st.b0, mu), ground, cfg.t_grid);
  write_sweep(dir / "decay.csv", decay);
  Outcome o;
  o.results["mesh"] = mesh_json(*st.mesh);
  o.results["lambda1"] = ground.lambda_est;
  o.results["lambda"] = lambda;
  o.results["decay_mu"] = mu;
  o.results["sweep"] = sweep_json(sweep);
  o.results["decay"] = sweep_json(decay);
  return o;
}

Outcome do_s_sweep(const RunConfig& cfg, const fs::path& dir) {
  StabilityOptions opt;
  opt.tol = cfg.tol;
  opt.max_iter = cfg.max_iter;
  opt.seed = cfg.seed;
  opt.workers = cfg.workers;
  opt.nehari_lambda_factor = cfg.s_sweep_nehari_factor;
  const SweepResult sweep = s_stability_sweep(Domain1D(cfg.domain), cfg.params,
                                              potential_profile(cfg.potential, cfg.domain), cfg.s_grid,
                                              cfg.s_sweep_mesh, opt);
  write_sweep(dir / "sweep.csv", sweep);
  Outcome o;
  o.results["sweep"] = sweep_json(sweep);
  return o;
}

Outcome do_bbm(const RunConfig& cfg, const fs::path& dir) {
  const double lo = cfg.bbm_domain.front().lo;
  const double hi = cfg.bbm_domain.back().hi;
  const auto bump = [c = 0.5 * (lo + hi), r = 0.5 * (hi - lo)](double x) {
    const double y = (x - c) / r;
    const double a = 1.0 - y * y;
    return a > 0.0 ? a * a : 0.0;
  };
  Outcome o;
  json runs = json::array();
  for (double p : cfg.bbm_p) {
    const SweepResult sweep = bbm_check(Domain1D(cfg.bbm_domain), bump, p, cfg.bbm_s_grid, cfg.bbm_mesh, cfg.workers);
    write_sweep(dir / ("bbm_p" + fmt("%g", p) + ".csv"), sweep);
    json r = sweep_json(sweep);
    r["p"] = p;
    runs.push_back(r);
  }
  o.results["bbm"] = runs;
  return o;
}

using Handler = Outcome (*)(const RunConfig&, const fs::path&);

Handler handler(const std::string& sub) {
  if (sub == "lambda1") return do_lambda1;
  if (sub == "lambda2") return do_lambda2;
  if (sub == "oracle") return do_oracle;
  if (sub == "nehari") return do_nehari;
  if (sub == "certify") return do_certify;
  if (sub == "mu-sweep") return do_mu_sweep;
  if (sub == "s-sweep") return do_s_sweep;
  if (sub == "bbm") return do_bbm;
  return nullptr;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << j.dump(2) << '\n';
}

json read_json_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ValidationError(path + ": cannot open file");
  std::stringstream ss;
  ss << is.rdbuf();
  const std::string textual = ss.str();
  try {
    return json::parse(textual);
  } catch (const json::parse_error& e) {
    const auto upto = std::min<std::size_t>(e.byte, textual.size());
    const auto line = 1 + std::count(textual.begin(), textual.begin() + static_cast<std::ptrdiff_t>(upto), '\n');
    throw ValidationError(path + ":" + std::to_string(line) + ": malformed JSON (" + e.what() + ")");
  }
}

int report(const std::string& manifest_path, std::ostream& out, std::ostream& err) {
  const json m = read_json_file(manifest_path);
  if (!m.is_object() || !m.contains("subcommand") || !m.contains("results") || !m.contains("summary"))
    throw ValidationError(manifest_path + ": not a manifest (needs subcommand, results, summary)");
  const std::vector<std::string> lines = summarize(m);
  for (const auto& l : lines) out << l << '\n';
  if (m["summary"] != json(lines)) {
    err << "summary mismatch: the stored summary differs from the recomputed one\n";
    return kFailure;
  }
  return kOk;
}

}  // namespace

const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> names{"lambda1", "lambda2", "oracle",  "nehari", "certify",
                                              "mu-sweep", "s-sweep", "bbm", "report"};
  return names;
}

RunConfig parse_config(const json& j) {
  if (!j.is_object()) bad("<root>", "expected a JSON object");
  reject_unknown(j, "", {"domain", "mesh", "params", "potential", "solver", "output", "workers", "certify",
                         "nehari", "mu_sweep", "s_sweep", "bbm"});
  RunConfig cfg;
  cfg.raw = j;

  const json* d = child(j, "domain");
  if (!d) bad("domain", "missing: domain is empty");
  cfg.domain = intervals(*d, "domain");

  if (const json* m = child(j, "mesh")) cfg.mesh = mesh_rule(*m, "mesh", cfg.mesh);

  if (const json* p = child(j, "params")) {
    object(*p, "params");
    reject_unknown(*p, "params", {"s", "p", "q", "mu", "lambda"});
    if (const json* x = child(*p, "s")) cfg.params.s = number(*x, "params.s");
    if (const json* x = child(*p, "p")) cfg.params.p = number(*x, "params.p");
    if (const json* x = child(*p, "q")) cfg.params.q = number(*x, "params.q");
    if (const json* x = child(*p, "mu")) cfg.params.mu = number(*x, "params.mu");
    if (const json* x = child(*p, "lambda")) cfg.params.lambda = number(*x, "params.lambda");
  }
  try {
    cfg.params.validate();
  } catch (const ValidationError& e) {
    bad("params", e.what());
  }
  if (cfg.params.lambda != 0.0) {
    const LambdaSpec fixed{cfg.params.lambda, std::nullopt};
    cfg.nehari_lambda = cfg.certify_lambda = cfg.mu_sweep_lambda = fixed;
  }

  if (const json* p = child(j, "potential")) cfg.potential = potential(*p, "potential");

  if (const json* s = child(j, "solver")) {
    object(*s, "solver");
    reject_unknown(*s, "solver", {"tol", "max_iter", "seed"});
    if (const json* x = child(*s, "tol")) cfg.tol = number(*x, "solver.tol");
    if (const json* x = child(*s, "max_iter")) cfg.max_iter = integer(*x, "solver.max_iter");
    if (const json* x = child(*s, "seed")) {
      if (!x->is_number_unsigned()) bad("solver.seed", "expected a non-negative integer");
      cfg.seed = x->get<std::uint64_t>();
    }
    if (!(cfg.tol > 0.0)) bad("solver.tol", "must be positive");
    if (cfg.max_iter < 1) bad("solver.max_iter", "must be at least 1");
  }

  if (const json* o = child(j, "output")) {
    object(*o, "output");
    reject_unknown(*o, "output", {"directory", "formats"});
    if (const json* x = child(*o, "directory")) cfg.out_dir = text(*x, "output.directory");
    if (const json* x = child(*o, "formats")) {
      if (!x->is_array()) bad("output.formats", "expected an array of strings");
      cfg.formats.clear();
      for (std::size_t i = 0; i < x->size(); ++i) {
        const std::string f = text((*x)[i], "output.formats[" + std::to_string(i) + "]");
        if (f != "json" && f != "csv") bad("output.formats[" + std::to_string(i) + "]", "unknown format (json, csv)");
        cfg.formats.push_back(f);
      }
    }
  }

  if (const json* w = child(j, "workers")) {
    cfg.workers = integer(*w, "workers");
    if (cfg.workers < 0) bad("workers", "must be non-negative (0 = automatic)");
  }

  if (const json* c = child(j, "certify")) {
    object(*c, "certify");
    reject_unknown(*c, "certify", {"lambda", "lambda_factor", "trials"});
    cfg.certify_lambda = lambda_spec(*c, "certify", cfg.certify_lambda);
    if (const json* x = child(*c, "trials")) cfg.certify_trials = integer(*x, "certify.trials");
    if (cfg.certify_trials < 1) bad("certify.trials", "must be at least 1");
  }

  if (const json* n = child(j, "nehari")) {
    object(*n, "nehari");
    reject_unknown(*n, "nehari", {"lambda", "lambda_factor"});
    cfg.nehari_lambda = lambda_spec(*n, "nehari", cfg.nehari_lambda);
  }

  if (const json* m = child(j, "mu_sweep")) {
    object(*m, "mu_sweep");
    reject_unknown(*m, "mu_sweep", {"lambda", "lambda_factor", "mu_grid", "t_grid"});
    cfg.mu_sweep_lambda = lambda_spec(*m, "mu_sweep", cfg.mu_sweep_lambda);
    if (const json* x = child(*m, "mu_grid")) cfg.mu_grid = numbers(*x, "mu_sweep.mu_grid");
    if (const json* x = child(*m, "t_grid")) cfg.t_grid = numbers(*x, "mu_sweep.t_grid");
  }
  for (std::size_t i = 0; i < cfg.mu_grid.size(); ++i) {
    if (!(cfg.mu_grid[i] > 0.0)) bad("mu_sweep.mu_grid", "values must be positive");
    if (i && !(cfg.mu_grid[i] < cfg.mu_grid[i - 1])) bad("mu_sweep.mu_grid", "grid must be strictly decreasing");
  }
  require_increasing(cfg.t_grid, "mu_sweep.t_grid");
  if (cfg.t_grid.front() < 1.0) bad("mu_sweep.t_grid", "values must be at least 1");

  if (const json* s = child(j, "s_sweep")) {
    object(*s, "s_sweep");
    reject_unknown(*s, "s_sweep", {"s_grid", "mesh", "nehari_lambda_factor"});
    if (const json* x = child(*s, "s_grid")) cfg.s_grid = numbers(*x, "s_sweep.s_grid");
    if (const json* x = child(*s, "mesh")) cfg.s_sweep_mesh = mesh_rule(*x, "s_sweep.mesh", cfg.s_sweep_mesh);
    if (const json* x = child(*s, "nehari_lambda_factor"))
      cfg.s_sweep_nehari_factor = number(*x, "s_sweep.nehari_lambda_factor");
  }
  require_s_grid(cfg.s_grid, "s_sweep.s_grid");

  if (const json* b = child(j, "bbm")) {
    object(*b, "bbm");
    reject_unknown(*b, "bbm", {"domain", "p", "s_grid", "mesh"});
    if (const json* x = child(*b, "domain")) cfg.bbm_domain = intervals(*x, "bbm.domain");
    if (const json* x = child(*b, "p")) cfg.bbm_p = numbers(*x, "bbm.p");
    if (const json* x = child(*b, "s_grid")) cfg.bbm_s_grid = numbers(*x, "bbm.s_grid");
    if (const json* x = child(*b, "mesh")) cfg.bbm_mesh = mesh_rule(*x, "bbm.mesh", cfg.bbm_mesh);
  }
  for (double p : cfg.bbm_p)
    if (!(p > 1.0)) bad("bbm.p", "exponents must exceed 1");
  require_s_grid(cfg.bbm_s_grid, "bbm.s_grid");
  return cfg;
}

RunConfig load_config(const std::string& path) { return parse_config(read_json_file(path)); }

Potential make_potential(const PotentialSpec& spec, const MeshPtr& mesh) {
  const auto n = static_cast<Eigen::Index>(mesh->size());
  if (spec.kind == "nodal") {
    if (spec.values.size() != mesh->size())
      bad("potential.values", "table has " + std::to_string(spec.values.size()) + " entries but the mesh has " +
                                  std::to_string(mesh->size()) + " nodes");
    return Potential(mesh, Eigen::Map<const Vector>(spec.values.data(), n));
  }
  const auto f = potential_profile(spec, mesh->domain().intervals());
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = f(mesh->nodes()[static_cast<std::size_t>(i)]);
  try {
    return Potential(mesh, std::move(v));
  } catch (const ValidationError& e) {
    bad("potential", e.what());
  }
}

std::string config_hash(const json& j) {
  std::uint64_t h = 14695981039346656037ULL;
  for (const unsigned char c : j.dump()) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::vector<std::string> summarize(const json& m) {
  const std::string sub = m.at("subcommand").get<std::string>();
  const json& r = m.at("results");
  std::vector<std::string> lines;
  lines.push_back("subcommand " + sub + ", config " + m.value("config_hash", std::string("?")) + ", status " +
                  m.value("status", std::string("?")));
  if (r.contains("error")) lines.push_back("error: " + r["error"].get<std::string>());
  if (r.contains("mesh"))
    lines.push_back("mesh: " + num(r["mesh"]["nodes"]) + " nodes, h = " + num(r["mesh"]["h"]));
  auto eig = [&](const char* label, const json& e) {
    lines.push_back(std::string(label) + " = " + num(e["lambda"]) + " (residual " + num(e["residual"]) +
                    ", iterations " + num(e["iterations"]) + ", sign " + e["sign"].get<std::string>() + ")");
  };
  if (sub == "lambda1" && r.contains("lambda1")) eig("lambda1", r["lambda1"]);
  if (sub == "lambda2" && r.contains("lambda2")) {
    eig("lambda1", r["lambda1"]);
    eig("lambda2", r["lambda2"]);
    lines.push_back("gap = " + num(r["gap"]));
  }
  if (sub == "oracle" && r.contains("eigenvalues")) {
    std::string l = "oracle eigenvalues:";
    for (const auto& v : r["eigenvalues"]) l += " " + num(v);
    lines.push_back(l);
  }
  if (sub == "nehari" && r.contains("nehari")) {
    const json& n = r["nehari"];
    lines.push_back("lambda = " + num(n["lambda"]) + ", lambda1 = " + num(n["lambda1"]));
    lines.push_back("m_lambda = " + num(n["m_lambda"]) + ", sign " + n["sign"].get<std::string>());
    lines.push_back("nehari residual " + num(n["nehari_residual"]) + ", eigen residual " + num(n["eigen_residual"]) +
                    ", energy identity defect " + num(n["energy_identity_defect"]));
  }
  if (sub == "certify" && r.contains("certificate")) {
    lines.push_back("lambda1 = " + num(r["lambda1"]));
    for (const char* key : {"certificate", "seeded_certificate"}) {
      const json& c = r[key];
      lines.push_back(std::string(key) + " at lambda " + num(c["lambda"]) + ": " + num(c["passes"]) + "/" +
                      num(c["trials"]) + " passes, max ratio " + num(c["max_ratio"]) + ", pass " +
                      yes(c["pass"].get<bool>()));
    }
  }
  auto sweep_lines = [&](const std::string& label, const json& s) {
    std::size_t flagged = 0;
    for (const auto& f : s["flagged"]) flagged += f.get<bool>() ? 1 : 0;
    lines.push_back(label + ": " + std::to_string(s["rows"].size()) + " points over " +
                    s["parameter"].get<std::string>() + ", " + std::to_string(flagged) + " flagged");
    if (!s["fitted_exponent"].is_null()) lines.push_back(label + " fitted exponent " + num(s["fitted_exponent"]));
    for (const auto& n : s["notes"]) lines.push_back(label + ": " + n.get<std::string>());
  };
  if (sub == "mu-sweep" && r.contains("sweep")) {
    lines.push_back("lambda1 = " + num(r["lambda1"]) + ", lambda = " + num(r["lambda"]));
    sweep_lines("mu sweep", r["sweep"]);
    sweep_lines("quotient decay at mu " + num(r["decay_mu"]), r["decay"]);
  }
  if (sub == "s-sweep" && r.contains("sweep")) sweep_lines("s sweep", r["sweep"]);
  if (sub == "bbm" && r.contains("bbm"))
    for (const auto& run : r["bbm"]) sweep_lines("bbm p=" + num(run["p"]), run);
  return lines;
}

int run(const std::string& subcommand, const std::string& config_path, const std::optional<std::string>& out_dir,
        const std::optional<std::uint64_t>& seed, std::ostream& out, std::ostream& err) {
  try {
    if (subcommand == "report") return report(config_path, out, err);
    const Handler h = handler(subcommand);
    if (!h) {
      err << "unknown subcommand '" << subcommand << "'\n";
      return kInvalid;
    }
    RunConfig cfg = load_config(config_path);
    if (seed) cfg.seed = *seed;
    if (out_dir) cfg.out_dir = *out_dir;
    const fs::path dir(cfg.out_dir);
    fs::create_directories(dir);

    json manifest;
    manifest["subcommand"] = subcommand;
    manifest["version"] = kVersion;
    manifest["config"] = cfg.raw;
    manifest["seed"] = cfg.seed;
    manifest["config_hash"] = config_hash(cfg.raw);

    const auto start = std::chrono::steady_clock::now();
    int code = kOk;
    try {
      const bool csv = std::find(cfg.formats.begin(), cfg.formats.end(), "csv") != cfg.formats.end();
      // An empty directory makes every CsvWriter a no-op.
      Outcome o = h(cfg, csv ? dir : fs::path());
      manifest["results"] = std::move(o.results);
      manifest["status"] = o.converged ? "ok" : "not_converged";
      if (!o.converged) code = kNotConverged;
    } catch (const SolverError& e) {
      manifest["results"] = {{"error", e.what()}};
      manifest["status"] = "solver_error";
      code = kNotConverged;
      err << "solver error: " << e.what() << '\n';
    }
    manifest["wall_time_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    manifest["summary"] = summarize(manifest);
    if (std::find(cfg.formats.begin(), cfg.formats.end(), "json") != cfg.formats.end())
      write_json(dir / "manifest.json", manifest);
    for (const auto& line : manifest["summary"]) out << line.get<std::string>() << '\n';
    return code;
  } catch (const ValidationError& e) {
    err << "invalid configuration: " << e.what() << '\n';
    return kInvalid;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kFailure;
  }
}

}  // namespace fracpq::cli
