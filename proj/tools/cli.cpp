#include "refprior/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>

#include "refprior/parallel.hpp"

namespace refprior::cli {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& what) { throw ConfigError(what); }

const json& require(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) fail(where + ": missing '" + key + "'");
  return obj.at(key);
}

// Rejects keys outside `allowed` so typos do not silently fall back to defaults.
void check_keys(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!obj.is_object()) fail(where + ": expected an object");
  for (const auto& [key, value] : obj.items()) {
    const bool known = std::any_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; });
    if (!known) fail(where + ": unknown key '" + key + "'");
  }
}

double number(const json& v, const std::string& where) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "inf" || s == "+inf") return kInf;
    if (s == "-inf") return kNegInf;
  }
  fail(where + ": expected a number");
}

double finite_number(const json& v, const std::string& where) {
  const double x = number(v, where);
  if (!std::isfinite(x)) fail(where + ": expected a finite number");
  return x;
}

std::uint64_t count(const json& v, const std::string& where) {
  if (!v.is_number_integer() || v.get<std::int64_t>() < 0) fail(where + ": expected a nonnegative integer");
  return v.get<std::uint64_t>();
}

bool flag(const json& v, const std::string& where) {
  if (!v.is_boolean()) fail(where + ": expected true or false");
  return v.get<bool>();
}

std::string text(const json& v, const std::string& where) {
  if (!v.is_string()) fail(where + ": expected a string");
  return v.get<std::string>();
}

Interval interval(const json& v, const std::string& where) {
  if (!v.is_array() || v.size() != 2) fail(where + ": expected [lo, hi]");
  const Interval out{number(v[0], where), number(v[1], where)};
  if (!(out.lo < out.hi)) fail(where + ": lo must be below hi");
  return out;
}

PriorFn prior(const json& v, const std::string& where) {
  if (v.is_string()) {
    const auto name = v.get<std::string>();
    if (name == "uniform") return PriorFn::uniform();
    if (name == "reciprocal") return PriorFn::reciprocal();
    fail(where + ": unknown prior '" + name + "'");
  }
  if (v.is_object() && v.contains("beta")) {
    check_keys(v, {"beta"}, where);
    const json& b = v["beta"];
    if (!b.is_array() || b.size() != 4) fail(where + ": beta needs [a, b, lo, hi]");
    const double a = finite_number(b[0], where), c = finite_number(b[1], where);
    const double lo = finite_number(b[2], where), hi = finite_number(b[3], where);
    if (!(a > 0.0 && c > 0.0 && lo < hi)) fail(where + ": beta needs a, b > 0 and lo < hi");
    return PriorFn::beta_shape(a, c, lo, hi);
  }
  fail(where + ": expected \"uniform\", \"reciprocal\" or {\"beta\": [a, b, lo, hi]}");
}

ModelPtr model(const json& v) {
  check_keys(v, {"name", "block", "bounds"}, "model");
  const std::string name = text(require(v, "name", "model"), "model.name");
  ModelPtr base;
  try {
    base = make_model(name);
  } catch (const DomainError& e) {
    fail(std::string("model: ") + e.what());
  }
  if (v.contains("block")) {
    const auto n = count(v["block"], "model.block");
    if (n < 1) fail("model.block must be >= 1");
    if (n > 1) base = iid_block(base, n);
  }
  return base;
}

std::vector<double> spaced(const json& v, bool logarithmic, const std::string& where) {
  check_keys(v, {"lo", "hi", "n"}, where);
  const double lo = finite_number(require(v, "lo", where), where + ".lo");
  const double hi = finite_number(require(v, "hi", where), where + ".hi");
  const auto n = count(require(v, "n", where), where + ".n");
  if (n < 1) fail(where + ".n must be >= 1");
  if (!(lo < hi) && n > 1) fail(where + ": lo must be below hi");
  if (logarithmic && !(lo > 0.0)) fail(where + ": logspace needs lo > 0");
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double f = n == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(n - 1);
    out[i] = logarithmic ? lo * std::pow(hi / lo, f) : lo + (hi - lo) * f;
  }
  out.back() = n == 1 ? lo : hi;
  return out;
}

std::vector<double> grid(const json& v) {
  check_keys(v, {"values", "linspace", "logspace", "insert"}, "grid");
  const int kinds = v.contains("values") + v.contains("linspace") + v.contains("logspace");
  if (kinds != 1) fail("grid: give exactly one of values, linspace, logspace");
  std::vector<double> out;
  if (v.contains("values")) {
    if (!v["values"].is_array()) fail("grid.values: expected an array");
    for (const auto& x : v["values"]) out.push_back(finite_number(x, "grid.values"));
    for (std::size_t i = 1; i < out.size(); ++i) {
      if (!(out[i - 1] < out[i])) fail("grid.values must be strictly increasing");
    }
  } else {
    const bool log = v.contains("logspace");
    out = spaced(v[log ? "logspace" : "linspace"], log, log ? "grid.logspace" : "grid.linspace");
  }
  if (v.contains("insert")) {
    if (!v["insert"].is_array()) fail("grid.insert: expected an array");
    for (const auto& x : v["insert"]) out.push_back(finite_number(x, "grid.insert"));
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
  }
  if (out.empty()) fail("grid is empty");
  return out;
}

QuadratureSettings quadrature(const json& v) {
  check_keys(v, {"nodes", "rel_tol", "abs_tol_log", "max_refinements", "initial_panels"}, "quadrature");
  QuadratureSettings q;
  if (v.contains("nodes")) q.nodes = static_cast<int>(count(v["nodes"], "quadrature.nodes"));
  if (v.contains("rel_tol")) q.rel_tol = finite_number(v["rel_tol"], "quadrature.rel_tol");
  if (v.contains("abs_tol_log")) q.abs_tol_log = finite_number(v["abs_tol_log"], "quadrature.abs_tol_log");
  if (v.contains("max_refinements")) {
    q.max_refinements = static_cast<int>(count(v["max_refinements"], "quadrature.max_refinements"));
  }
  if (v.contains("initial_panels")) {
    q.initial_panels = static_cast<int>(count(v["initial_panels"], "quadrature.initial_panels"));
  }
  try {
    q.validate();
  } catch (const Error& e) {
    fail(std::string("quadrature: ") + e.what());
  }
  return q;
}

SamplingDesign design(const std::string& name) {
  if (name == "independent") return SamplingDesign::independent;
  if (name == "latin_hypercube") return SamplingDesign::latin_hypercube;
  if (name == "shifted_lattice") return SamplingDesign::shifted_lattice;
  fail("mc.design: unknown design '" + name + "'");
}

MCConfig mc_config(const json& v) {
  check_keys(v,
             {"k", "m", "seed", "working_interval", "pi_star", "use_sufficient_statistic",
              "common_random_numbers", "design", "replications", "control_variates", "quadrature"},
             "mc");
  MCConfig c;
  c.k = count(require(v, "k", "mc"), "mc.k");
  c.m = count(require(v, "m", "mc"), "mc.m");
  c.seed = count(require(v, "seed", "mc"), "mc.seed");
  if (v.contains("working_interval")) c.working_interval = interval(v["working_interval"], "mc.working_interval");
  if (v.contains("pi_star")) c.pi_star = prior(v["pi_star"], "mc.pi_star");
  if (v.contains("use_sufficient_statistic")) {
    c.use_sufficient_statistic = flag(v["use_sufficient_statistic"], "mc.use_sufficient_statistic");
  }
  if (v.contains("common_random_numbers")) {
    c.common_random_numbers = flag(v["common_random_numbers"], "mc.common_random_numbers");
  }
  if (v.contains("design")) c.design = design(text(v["design"], "mc.design"));
  if (v.contains("replications")) c.replications = count(v["replications"], "mc.replications");
  if (v.contains("control_variates")) c.control_variates = flag(v["control_variates"], "mc.control_variates");
  if (v.contains("quadrature")) c.quadrature = quadrature(v["quadrature"]);
  return c;
}

CompactSequence sequence(const json& v, std::vector<double>& i_values) {
  check_keys(v, {"kind", "centre", "i"}, "sequence");
  const std::string kind = text(require(v, "kind", "sequence"), "sequence.kind");
  const json& is = require(v, "i", "sequence");
  if (!is.is_array() || is.empty()) fail("sequence.i: expected a nonempty array");
  for (const auto& x : is) i_values.push_back(finite_number(x, "sequence.i"));
  for (std::size_t j = 1; j < i_values.size(); ++j) {
    if (!(i_values[j - 1] < i_values[j])) fail("sequence.i must be strictly increasing");
  }
  if (kind == "symmetric") {
    return CompactSequence::symmetric(v.contains("centre") ? finite_number(v["centre"], "sequence.centre") : 0.0);
  }
  if (v.contains("centre")) fail("sequence.centre only applies to the symmetric kind");
  if (kind == "log_symmetric") return CompactSequence::log_symmetric();
  if (kind == "discrete") return CompactSequence::discrete();
  fail("sequence.kind: unknown kind '" + kind + "'");
}

PermissibilityOptions permissibility(const json& v, const Model& m) {
  check_keys(v, {"prior", "sequence", "threshold", "cutoffs", "kl_budget", "quadrature"}, "permissibility");
  PermissibilityOptions p;
  p.prior = prior(require(v, "prior", "permissibility"), "permissibility.prior");
  p.sequence = sequence(require(v, "sequence", "permissibility"), p.i_values);
  if (v.contains("threshold")) p.threshold = finite_number(v["threshold"], "permissibility.threshold");
  if (v.contains("kl_budget")) p.settings.kl_budget = finite_number(v["kl_budget"], "permissibility.kl_budget");
  if (v.contains("quadrature")) p.settings.quadrature = quadrature(v["quadrature"]);
  if (v.contains("cutoffs")) {
    if (!v["cutoffs"].is_array() || v["cutoffs"].size() < 2) fail("permissibility.cutoffs: need at least two");
    p.settings.cutoffs.clear();
    for (const auto& c : v["cutoffs"]) p.settings.cutoffs.push_back(finite_number(c, "permissibility.cutoffs"));
  }
  try {
    p.sequence.validate(m, p.i_values);
  } catch (const DomainError& e) {
    fail(std::string("permissibility.sequence: ") + e.what());
  }
  return p;
}

InfoOptions info(const json& v, const Model& m) {
  check_keys(v, {"prior", "alternative", "set", "k", "estimator", "budget", "use_sufficient_statistic"},
             "info");
  InfoOptions o;
  o.prior = prior(require(v, "prior", "info"), "info.prior");
  if (v.contains("alternative")) o.alternative = prior(v["alternative"], "info.alternative");
  const json& s = require(v, "set", "info");
  check_keys(s, {"lo", "hi", "discrete"}, "info.set");
  o.set.lo = finite_number(require(s, "lo", "info.set"), "info.set.lo");
  o.set.hi = finite_number(require(s, "hi", "info.set"), "info.set.hi");
  o.set.discrete = s.contains("discrete") && flag(s["discrete"], "info.set.discrete");
  try {
    o.set.validate(m);
  } catch (const DomainError& e) {
    fail(std::string("info.set: ") + e.what());
  }
  const json& ks = require(v, "k", "info");
  if (!ks.is_array() || ks.empty()) fail("info.k: expected a nonempty array");
  for (const auto& k : ks) {
    const auto value = count(k, "info.k");
    if (value < 1) fail("info.k entries must be >= 1");
    o.ks.push_back(value);
  }
  if (v.contains("budget")) o.settings.budget = finite_number(v["budget"], "info.budget");
  if (v.contains("use_sufficient_statistic")) {
    o.settings.use_sufficient_statistic = flag(v["use_sufficient_statistic"], "info.use_sufficient_statistic");
  }
  if (v.contains("estimator")) {
    const json& e = v["estimator"];
    check_keys(e, {"method", "seed", "draws"}, "info.estimator");
    const std::string method = text(require(e, "method", "info.estimator"), "info.estimator.method");
    if (method == "quadrature") {
      if (e.contains("seed") || e.contains("draws")) fail("info.estimator: quadrature takes no seed or draws");
    } else if (method == "monte_carlo") {
      o.estimator = InformationEstimator::monte_carlo(count(require(e, "seed", "info.estimator"), "info.estimator.seed"),
                                                      count(require(e, "draws", "info.estimator"), "info.estimator.draws"));
      if (o.estimator.draws < 2) fail("info.estimator.draws must be >= 2");
    } else {
      fail("info.estimator.method: expected quadrature or monte_carlo");
    }
  }
  return o;
}

void check_grid(const RunConfig& c, bool need_anchor) {
  const ParameterSpace space = c.model->parameter_space();
  for (double theta : c.grid) {
    if (!space.contains(theta)) fail("grid point " + format_double(theta) + " lies outside the parameter space");
    if (theta < c.bounds.lo || theta > c.bounds.hi) {
      fail("grid point " + format_double(theta) + " lies outside model.bounds");
    }
  }
  if (need_anchor && std::find(c.grid.begin(), c.grid.end(), c.anchor) == c.grid.end()) {
    fail("anchor " + format_double(c.anchor) + " is not a grid point");
  }
}

Command command(const std::string& name) {
  if (name == "compute") return Command::compute;
  if (name == "oracle") return Command::oracle;
  if (name == "permissibility") return Command::permissibility;
  if (name == "info-diagnostics") return Command::info_diagnostics;
  fail("unknown command '" + name + "'");
}

std::string timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm utc{};
  gmtime_r(&now, &utc);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &utc);
  return buf;
}

json provenance(const RunConfig& c, bool with_timestamp) {
  json meta;
  meta["config"] = c.document;
  meta["config_hash"] = hash_hex(c.hash);
  if (with_timestamp) meta["timestamp"] = timestamp();
  return meta;
}

std::string sibling(const std::string& path, const std::string& suffix) { return path + suffix; }

PriorTable oracle_table(const RunConfig& c, OracleKind kind) {
  PriorTable t;
  t.grid = c.grid;
  t.anchor = c.anchor;
  t.std_err.assign(c.grid.size(), 0.0);
  const double base = oracle_log_prior(kind, *c.model, c.anchor, c.mc.quadrature);
  for (double theta : c.grid) {
    t.log_pi.push_back(theta == c.anchor ? 0.0 : oracle_log_prior(kind, *c.model, theta, c.mc.quadrature) - base);
  }
  t.meta = {0, 0, 0, c.model->name(), c.hash};
  return t;
}

void write_overlay(const RunConfig& c, const PriorTable& table, std::vector<std::string>& files) {
  const PriorTable oracle = oracle_table(c, *c.overlay);
  std::string csv = "theta,pi,pi_stderr,oracle_pi\n";
  for (std::size_t i = 0; i < table.size(); ++i) {
    const double pi = std::exp(table.log_pi[i]);
    csv += format_double(table.grid[i]) + ',' + format_double(pi) + ',' + format_double(pi * table.std_err[i]) +
           ',' + format_double(std::exp(oracle.log_pi[i])) + '\n';
  }
  const std::string path = sibling(c.output_path, ".overlay.csv");
  write_text(path, csv);
  files.push_back(path);
}

void emit(const RunConfig& c, const PriorTable& table, std::vector<std::string>& files) {
  json extra = provenance(c, c.format == TableFormat::json);
  extra["command"] = c.document["command"];
  if (c.format == TableFormat::json && c.overlay) {
    extra["overlay"] = to_string(*c.overlay);
  }
  write_table(table, c.format, c.output_path, extra);
  files.push_back(c.output_path);
  if (c.format == TableFormat::csv) files.push_back(sibling(c.output_path, ".meta.json"));
  if (c.overlay) write_overlay(c, table, files);
}

void write_report(const RunConfig& c, const json& report, const std::string& csv, std::vector<std::string>& files) {
  if (c.format == TableFormat::json) {
    json doc = report;
    doc["meta"] = provenance(c, true);
    write_text(c.output_path, doc.dump(2) + '\n');
    files.push_back(c.output_path);
    return;
  }
  write_text(c.output_path, csv);
  json meta = report;
  meta.erase("rows");
  meta["meta"] = provenance(c, false);
  write_text(sibling(c.output_path, ".meta.json"), meta.dump(2) + '\n');
  files.push_back(c.output_path);
  files.push_back(sibling(c.output_path, ".meta.json"));
}

json number_or_string(double x) {
  if (std::isfinite(x)) return x;
  if (std::isnan(x)) return "nan";
  return x > 0 ? "inf" : "-inf";
}

void run_permissibility(const RunConfig& c, std::vector<std::string>& files) {
  const auto& p = c.permissibility;
  const PermissibilityReport r = permissibility_verdict(*c.model, p.prior, p.sequence, p.i_values, p.settings,
                                                        p.threshold);
  json report;
  report["verdict"] = to_string(r.status);
  report["propriety"] = to_string(r.propriety);
  report["extrapolated_limit"] = number_or_string(r.extrapolated_limit);
  report["reason"] = r.reason;
  json rows = json::array();
  std::string csv = "i,value,stderr,verdict\n";
  for (std::size_t j = 0; j < r.series.size(); ++j) {
    const auto& e = r.series[j];
    json row;
    row["i"] = r.i_values[j];
    row["value"] = number_or_string(e.value);
    row["stderr"] = e.std_err;
    row["verdict"] = to_string(e.verdict);
    row["budget_exceeded"] = e.budget_exceeded;
    json cut = json::array();
    for (const auto& [cutoff, value] : e.cutoff_series) cut.push_back({cutoff, number_or_string(value)});
    row["cutoff_series"] = cut;
    rows.push_back(row);
    csv += format_double(r.i_values[j]) + ',' + format_double(e.value) + ',' + format_double(e.std_err) + ',' +
           to_string(e.verdict) + '\n';
  }
  report["rows"] = rows;
  write_report(c, report, csv, files);
}

void run_info(const RunConfig& c, std::vector<std::string>& files) {
  const auto& o = c.info;
  InformationEstimator estimator = o.estimator;
  estimator.threads = c.mc.threads;
  json rows = json::array();
  std::string csv = o.alternative ? "k,information,stderr,alternative,alternative_stderr,gap,gap_stderr\n"
                                  : "k,information,stderr\n";
  if (o.alternative) {
    const auto gaps = mmi_gap(*c.model, o.prior, *o.alternative, o.set, o.ks, o.settings, estimator);
    for (const auto& g : gaps) {
      rows.push_back({{"k", g.k},
                      {"information", g.reference.value},
                      {"stderr", g.reference.std_err},
                      {"alternative", g.alternative.value},
                      {"alternative_stderr", g.alternative.std_err},
                      {"gap", g.gap},
                      {"gap_stderr", g.std_err}});
      csv += std::to_string(g.k) + ',' + format_double(g.reference.value) + ',' + format_double(g.reference.std_err) +
             ',' + format_double(g.alternative.value) + ',' + format_double(g.alternative.std_err) + ',' +
             format_double(g.gap) + ',' + format_double(g.std_err) + '\n';
    }
  } else {
    for (std::size_t k : o.ks) {
      const auto e = expected_information(*c.model, o.prior, o.set, k, o.settings, estimator);
      rows.push_back({{"k", k}, {"information", e.value}, {"stderr", e.std_err}});
      csv += std::to_string(k) + ',' + format_double(e.value) + ',' + format_double(e.std_err) + '\n';
    }
  }
  json report;
  report["prior"] = o.prior.label;
  if (o.alternative) report["alternative"] = o.alternative->label;
  report["rows"] = rows;
  write_report(c, report, csv, files);
}

std::string error_kind(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return "config";
  if (dynamic_cast<const IoError*>(&e)) return "io";
  if (dynamic_cast<const ImproprietyError*>(&e)) return "impropriety";
  if (dynamic_cast<const NonregularityError*>(&e)) return "nonregularity";
  if (dynamic_cast<const UnsupportedOperation*>(&e)) return "unsupported";
  if (dynamic_cast<const ToleranceFailure*>(&e)) return "tolerance";
  if (dynamic_cast<const DomainError*>(&e)) return "domain";
  if (dynamic_cast<const RangeError*>(&e)) return "range";
  if (dynamic_cast<const InvariantViolation*>(&e)) return "invariant";
  return "internal";
}

}  // namespace

OracleKind parse_oracle_kind(const std::string& name) {
  if (name == "jeffreys") return OracleKind::jeffreys;
  if (name == "nonregular") return OracleKind::nonregular;
  if (name == "uniform-pair") return OracleKind::uniform_pair;
  if (name == "theta-theta2") return OracleKind::theta_theta2;
  if (name == "arcsine") return OracleKind::arcsine;
  throw ConfigError("unknown oracle '" + name + "'");
}

std::string to_string(OracleKind kind) {
  switch (kind) {
    case OracleKind::jeffreys: return "jeffreys";
    case OracleKind::nonregular: return "nonregular";
    case OracleKind::uniform_pair: return "uniform-pair";
    case OracleKind::theta_theta2: return "theta-theta2";
    case OracleKind::arcsine: return "arcsine";
  }
  return "?";
}

double oracle_log_prior(OracleKind kind, const Model& model, double theta, const QuadratureSettings& settings) {
  switch (kind) {
    case OracleKind::jeffreys: return std::log(jeffreys_prior(model, theta, settings));
    case OracleKind::nonregular: return std::log(nonregular_prior(model, theta, settings));
    case OracleKind::uniform_pair: return std::log(uniform_pair_prior(UniformPairSpec::theta_theta2(), theta));
    case OracleKind::theta_theta2: return std::log(theta_theta2_prior(theta));
    case OracleKind::arcsine:
      if (!(theta > 0.0 && theta < 1.0)) throw DomainError("arcsine oracle needs theta in (0, 1)");
      return -0.5 * std::log(theta) - 0.5 * std::log1p(-theta);
  }
  throw InvariantViolation("oracle_log_prior: unknown kind");
}

RunConfig parse_config(const json& input, const Overrides& overrides) {
  if (!input.is_object()) fail("config: expected a JSON object");
  check_keys(input, {"command", "model", "grid", "anchor", "mc", "oracle", "permissibility", "info", "output"},
             "config");
  json doc = input;
  RunConfig c;
  c.command = command(text(require(doc, "command", "config"), "command"));
  c.model = model(require(doc, "model", "config"));
  if (doc["model"].contains("bounds")) {
    c.bounds = interval(doc["model"]["bounds"], "model.bounds");
    const ParameterSpace space = c.model->parameter_space();
    if (c.bounds.lo < space.lo || c.bounds.hi > space.hi) fail("model.bounds exceed the parameter space");
  }

  const json& out = require(doc, "output", "config");
  check_keys(out, {"path", "format", "overlay"}, "output");
  c.output_path = overrides.out ? *overrides.out : text(require(out, "path", "output"), "output.path");
  if (c.output_path.empty()) fail("output.path is empty");
  try {
    c.format = parse_table_format(out.contains("format") ? text(out["format"], "output.format") : "csv");
  } catch (const DomainError& e) {
    fail(std::string("output.format: ") + e.what());
  }
  if (out.contains("overlay")) c.overlay = parse_oracle_kind(text(out["overlay"], "output.overlay"));

  auto forbid = [&](std::initializer_list<const char*> keys) {
    for (const char* k : keys) {
      if (doc.contains(k)) fail(std::string("'") + k + "' does not apply to command " + doc["command"].get<std::string>());
    }
  };

  switch (c.command) {
    case Command::compute:
    case Command::oracle: {
      forbid({"permissibility", "info"});
      c.grid = grid(require(doc, "grid", "config"));
      c.anchor = finite_number(require(doc, "anchor", "config"), "anchor");
      check_grid(c, true);
      if (c.command == Command::compute) {
        forbid({"oracle"});
        if (overrides.seed && doc.contains("mc")) doc["mc"]["seed"] = *overrides.seed;
        c.mc = mc_config(require(doc, "mc", "config"));
        try {
          c.mc.validate(c.grid);
        } catch (const DomainError& e) {
          fail(e.what());
        }
      } else {
        forbid({"mc"});
        c.oracle = parse_oracle_kind(text(require(doc, "oracle", "config"), "oracle"));
        if (c.overlay) fail("output.overlay applies to compute only");
        if (c.oracle == OracleKind::uniform_pair && c.model->name().find("uniform-pair") == std::string::npos) {
          fail("the uniform-pair oracle needs the uniform-pair model");
        }
      }
      if (c.overlay && c.overlay == OracleKind::uniform_pair &&
          c.model->name().find("uniform-pair") == std::string::npos) {
        fail("the uniform-pair overlay needs the uniform-pair model");
      }
      break;
    }
    case Command::permissibility:
      forbid({"grid", "anchor", "mc", "oracle", "info"});
      if (c.overlay) fail("output.overlay applies to compute only");
      c.permissibility = permissibility(require(doc, "permissibility", "config"), *c.model);
      break;
    case Command::info_diagnostics:
      forbid({"grid", "anchor", "mc", "oracle", "permissibility"});
      if (c.overlay) fail("output.overlay applies to compute only");
      if (overrides.seed && doc.contains("info") && doc["info"].contains("estimator") &&
          doc["info"]["estimator"].value("method", "") == "monte_carlo") {
        doc["info"]["estimator"]["seed"] = *overrides.seed;
      }
      c.info = info(require(doc, "info", "config"), *c.model);
      break;
  }
  c.mc.threads = resolve_threads(overrides.threads);

  c.document = doc;
  c.document["output"].erase("path");
  c.hash = fnv1a64(c.document.dump());
  return c;
}

RunConfig load_config(const std::string& path, const Overrides& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
  }
  return parse_config(doc, overrides);
}

RunOutcome execute(const RunConfig& c) {
  RunOutcome outcome;
  switch (c.command) {
    case Command::compute: {
      PriorTable t = mc_reference_prior(*c.model, c.grid, c.anchor, c.mc);
      t.meta.config_hash = c.hash;
      emit(c, t, outcome.files);
      break;
    }
    case Command::oracle:
      emit(c, oracle_table(c, c.oracle), outcome.files);
      break;
    case Command::permissibility:
      run_permissibility(c, outcome.files);
      break;
    case Command::info_diagnostics:
      run_info(c, outcome.files);
      break;
  }
  return outcome;
}

int run(const std::string& config_path, const Overrides& overrides, std::ostream& err) {
  int code = 1;
  try {
    const RunConfig c = load_config(config_path, overrides);
    execute(c);
    return 0;
  } catch (const ConfigError& e) {
    code = 2;
    err << json{{"error", {{"kind", error_kind(e)}, {"message", e.what()}, {"exit_code", code}}}}.dump() << '\n';
  } catch (const std::exception& e) {
    err << json{{"error", {{"kind", error_kind(e)}, {"message", e.what()}, {"exit_code", code}}}}.dump() << '\n';
  }
  return code;
}

}  // namespace refprior::cli
