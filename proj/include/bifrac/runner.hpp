#pragma once

// Config-driven experiment runner behind the bifrac command line tool.
// A config is a JSON document:
//
//   {
//     "experiment": "separation",                 optional, must match the CLI
//     "exponents": {"n": 1, "alpha": 0.5, "p1": 2.5, "p2": 2.5},
//     "grid": {"origin": [-32], "h": 0.25, "M": 256},
//     "mode": "direct" | "fft",
//     "budget_bytes": 2147483648,
//     "seed": 7,
//     "fixtures": {"b": {"kind": "sin", "frequency": 1.0}, ...},
//     "params": { experiment specific, see README }
//   }

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "bifrac/bifrac.hpp"
#include "bifrac/report_io.hpp"

namespace bifrac {

inline constexpr const char* kVersion = "0.1.0";

/// Malformed command line or config (exit status 2).
class UsageError : public Error {
 public:
  using Error::Error;
};

inline const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names{"apply",   "commutator", "bmo",     "cmo",        "weights",
                                              "lemma1",  "fkr",        "witness", "separation", "truncation"};
  return names;
}

inline std::string experiment_list() {
  std::string s;
  for (const auto& n : experiment_names()) s += (s.empty() ? "" : ", ") + n;
  return s;
}

inline void require_known_experiment(const std::string& name) {
  const auto& names = experiment_names();
  if (std::find(names.begin(), names.end(), name) == names.end())
    throw UsageError("unknown experiment '" + name + "'; valid experiments: " + experiment_list());
}

struct ExperimentConfig {
  std::string experiment;
  ExponentConfig exponents;
  GridSpec grid;
  ApplyMode mode = ApplyMode::direct;
  std::optional<std::size_t> budget;
  std::uint64_t seed = 0;
  std::map<std::string, FixtureSpec> fixtures;
  json params = json::object();
  json source = json::object();
};

namespace detail {

inline const json& require_key(const json& j, const std::string& key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) throw UsageError("config: missing '" + key + "' in " + where);
  return j.at(key);
}

inline double as_number(const json& j, const std::string& what) {
  if (!j.is_number()) throw UsageError("config: '" + what + "' must be a number");
  return j.get<double>();
}

inline double number_or(const json& j, const std::string& key, double fallback) {
  if (!j.is_object() || !j.contains(key)) return fallback;
  return as_number(j.at(key), key);
}

inline std::vector<double> number_list(const json& j, const std::string& what) {
  if (!j.is_array()) throw UsageError("config: '" + what + "' must be a list of numbers");
  std::vector<double> v;
  for (const auto& e : j) v.push_back(as_number(e, what));
  return v;
}

inline Point parse_point(const json& j, int dim, const std::string& what) {
  Point p{0.0, 0.0};
  if (j.is_number() && dim == 1) {
    p[0] = j.get<double>();
    return p;
  }
  const auto v = number_list(j, what);
  if (v.size() != static_cast<std::size_t>(dim))
    throw UsageError("config: '" + what + "' needs " + std::to_string(dim) + " coordinates");
  for (int a = 0; a < dim; ++a) p[a] = v[a];
  return p;
}

inline Cube parse_cube(const json& j, int dim, const std::string& what) {
  return {parse_point(require_key(j, "center", what), dim, what + ".center"),
          as_number(require_key(j, "side", what), what + ".side")};
}

inline std::vector<Point> parse_points(const json& j, int dim, const std::string& what) {
  if (!j.is_array()) throw UsageError("config: '" + what + "' must be a list");
  std::vector<Point> v;
  for (const auto& e : j) v.push_back(parse_point(e, dim, what));
  return v;
}

inline FixtureSpec parse_fixture(const json& j, const std::string& name) {
  FixtureSpec s;
  if (!j.is_object()) throw UsageError("config: fixture '" + name + "' must be an object");
  const json& kind = require_key(j, "kind", "fixture '" + name + "'");
  if (!kind.is_string()) throw UsageError("config: fixture '" + name + "' kind must be a string");
  s.kind = kind.get<std::string>();
  for (const auto& [key, value] : j.items()) {
    if (key == "kind") continue;
    s.params[key] = as_number(value, name + "." + key);
  }
  return s;
}

}  // namespace detail

/// Parses and validates a config document. The experiment name from the
/// command line takes precedence; a conflicting "experiment" entry is an
/// error.
inline ExperimentConfig parse_config(const json& doc, const std::string& experiment) {
  require_known_experiment(experiment);
  if (!doc.is_object()) throw UsageError("config: top level must be an object");
  if (doc.contains("experiment")) {
    if (!doc.at("experiment").is_string() || doc.at("experiment").get<std::string>() != experiment)
      throw UsageError("config is for experiment '" + doc.at("experiment").dump() + "', not '" + experiment + "'");
  }
  ExperimentConfig c;
  c.experiment = experiment;
  c.source = doc;
  const json& e = detail::require_key(doc, "exponents", "config");
  const double n = detail::as_number(detail::require_key(e, "n", "exponents"), "exponents.n");
  if (n != std::round(n)) throw HypothesisError("requires n in {1, 2}");
  c.exponents = ExponentConfig::make(static_cast<int>(n), detail::as_number(detail::require_key(e, "alpha", "exponents"), "alpha"),
                                     detail::as_number(detail::require_key(e, "p1", "exponents"), "p1"),
                                     detail::as_number(detail::require_key(e, "p2", "exponents"), "p2"));
  const json& g = detail::require_key(doc, "grid", "config");
  c.grid.dim = c.exponents.dim;
  c.grid.origin = detail::parse_point(detail::require_key(g, "origin", "grid"), c.grid.dim, "grid.origin");
  c.grid.h = detail::as_number(detail::require_key(g, "h", "grid"), "grid.h");
  const double m = detail::as_number(detail::require_key(g, "M", "grid"), "grid.M");
  if (!(m >= 2.0) || m != std::round(m)) throw UsageError("config: grid.M must be an integer >= 2");
  c.grid.M = static_cast<std::size_t>(m);
  if (doc.contains("mode")) {
    const std::string mode = doc.at("mode").is_string() ? doc.at("mode").get<std::string>() : "";
    if (mode == "direct")
      c.mode = ApplyMode::direct;
    else if (mode == "fft")
      c.mode = ApplyMode::fft;
    else
      throw UsageError("config: mode must be \"direct\" or \"fft\"");
  }
  if (doc.contains("budget_bytes")) {
    const double b = detail::as_number(doc.at("budget_bytes"), "budget_bytes");
    if (!(b > 0.0)) throw UsageError("config: budget_bytes must be positive");
    c.budget = static_cast<std::size_t>(b);
  }
  if (doc.contains("seed")) {
    const double s = detail::as_number(doc.at("seed"), "seed");
    if (s < 0.0 || s != std::round(s)) throw UsageError("config: seed must be a nonnegative integer");
    c.seed = static_cast<std::uint64_t>(s);
  }
  if (doc.contains("fixtures")) {
    if (!doc.at("fixtures").is_object()) throw UsageError("config: fixtures must be an object");
    for (const auto& [name, spec] : doc.at("fixtures").items()) c.fixtures[name] = detail::parse_fixture(spec, name);
  }
  if (doc.contains("params")) {
    if (!doc.at("params").is_object()) throw UsageError("config: params must be an object");
    c.params = doc.at("params");
  }
  return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path, const std::string& experiment) {
  require_known_experiment(experiment);
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file '" + path.string() + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw UsageError("config '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return parse_config(doc, experiment);
}

struct RunResult {
  json report;
  std::vector<std::pair<std::string, Table>> tables;
};

namespace detail {

class Context {
 public:
  explicit Context(const ExperimentConfig& c) : cfg(c), grid(c.grid), dim(c.grid.dim) {}

  const ExperimentConfig& cfg;
  const GridSpec& grid;
  int dim;

  SampledFunction fixture(const std::string& name) const {
    auto it = cfg.fixtures.find(name);
    if (it == cfg.fixtures.end()) throw UsageError("config: experiment '" + cfg.experiment + "' needs fixture '" + name + "'");
    return make_fixture(grid, it->second, cfg.seed);
  }

  std::optional<SampledFunction> optional_fixture(const std::string& name) const {
    if (!cfg.fixtures.count(name)) return std::nullopt;
    return fixture(name);
  }

  const json& param(const std::string& key) const { return require_key(cfg.params, key, "params"); }
  bool has(const std::string& key) const { return cfg.params.contains(key); }
  double number(const std::string& key, double fallback) const { return number_or(cfg.params, key, fallback); }
  std::vector<double> numbers(const std::string& key) const { return number_list(param(key), "params." + key); }
  Cube cube(const std::string& key) const { return parse_cube(param(key), dim, "params." + key); }
  std::vector<Point> points(const std::string& key) const {
    return has(key) ? parse_points(param(key), dim, "params." + key) : std::vector<Point>{};
  }

  KernelParams kernel() const {
    KernelParams k{dim, cfg.exponents.alpha, std::nullopt};
    if (has("delta")) k.delta = as_number(param("delta"), "params.delta");
    return k;
  }

  std::vector<Cube> family() const {
    const int top = max_resolved_level(grid);
    int lo = 0, hi = top;
    if (has("levels")) {
      const auto v = numbers("levels");
      if (v.size() != 2) throw UsageError("config: params.levels must be [min, max]");
      lo = static_cast<int>(v[0]);
      hi = static_cast<int>(v[1]);
    }
    return dyadic_cubes(grid, lo, hi);
  }

  json exponents_json() const {
    const ExponentConfig& e = cfg.exponents;
    return {{"n", e.dim}, {"alpha", e.alpha}, {"p1", e.p1}, {"p2", e.p2}, {"p", e.p}, {"q", e.q}};
  }
};

inline std::optional<LinearFit> try_loglog(const std::vector<double>& x, const std::vector<double>& y) {
  std::vector<double> px, py;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (x[i] > 0.0 && y[i] > 0.0) {
      px.push_back(x[i]);
      py.push_back(y[i]);
    }
  if (px.size() < 2) return std::nullopt;
  return fit_loglog(px, py);
}

inline json fit_json(const std::optional<LinearFit>& f) {
  if (!f) return nullptr;
  return {{"slope", f->slope}, {"intercept", f->intercept}, {"r_squared", f->r_squared}};
}

inline RunResult run_apply(const Context& c) {
  const auto f = c.fixture("f"), g = c.fixture("g");
  const BilinearOperator op(c.grid, c.kernel(), c.cfg.mode);
  const SampledFunction out = op(f, g);
  RunResult r;
  r.report = {{"max_abs", out.max_abs()}, {"lq_norm", lq_norm(out, c.cfg.exponents.q)}};
  r.tables.emplace_back("apply.csv", function_table(out, "I_alpha(f,g) [arb]"));
  return r;
}

inline RunResult run_commutator(const Context& c) {
  const auto b = c.fixture("b"), f = c.fixture("f"), g = c.fixture("g");
  const int slot = static_cast<int>(c.number("slot", 1.0));
  const BilinearOperator op(c.grid, c.kernel(), c.cfg.mode);
  const SampledFunction out = commutator(b, f, g, op, slot);
  RunResult r;
  r.report = {{"slot", slot}, {"max_abs", out.max_abs()}, {"lq_norm", lq_norm(out, c.cfg.exponents.q)}};
  r.tables.emplace_back("commutator.csv", function_table(out, "commutator [arb]"));
  return r;
}

inline RunResult run_bmo(const Context& c) {
  const auto b = c.fixture("b");
  const auto cubes = c.family();
  const FamilySupremum sup = bmo_supremum(b, cubes);
  RunResult r;
  r.report = {{"family_supremum", sup.value},
              {"label", "family supremum (lower bound)"},
              {"worst_cube", cube_json(cubes[sup.index], c.dim)},
              {"family_size", cubes.size()}};
  if (c.number("normalize", 0.0) != 0.0 && sup.value > 0.0) {
    const SampledFunction nb = normalize_bmo(b, cubes);
    r.report["normalized_bmo_norm"] = bmo_norm(nb, cubes);
  }
  Table t = cube_columns(c.dim);
  t.columns.push_back("mean_oscillation [1]");
  for (const Cube& q : cubes) {
    auto row = cube_cells(q, c.dim);
    row.push_back(Table::cell(mean_oscillation(b, q)));
    t.rows.push_back(std::move(row));
  }
  r.tables.emplace_back("cubes.csv", std::move(t));
  return r;
}

inline RunResult run_cmo(const Context& c) {
  const auto b = c.fixture("b");
  const auto volumes = c.numbers("volumes");
  const Cube ref = c.cube("ref_cube");
  const auto shifts = c.points("shifts");
  const OscillationReport osc = cmo_moduli(b, volumes, ref, shifts);
  RunResult r;
  r.report = to_json(osc, c.dim);
  auto trend = [](const std::vector<ScaleModulus>& v) {
    std::vector<double> x, y;
    for (const auto& m : v) {
      x.push_back(m.volume);
      y.push_back(m.modulus);
    }
    return fit_json(try_loglog(x, y));
  };
  std::vector<double> td, tm;
  for (const auto& m : osc.translation) {
    td.push_back(m.distance);
    tm.push_back(m.modulus);
  }
  r.report["trends"] = {{"small_scale", trend(osc.small_scale)},
                        {"large_scale", trend(osc.large_scale)},
                        {"translation", fit_json(try_loglog(td, tm))}};
  r.tables.emplace_back("oscillation.csv", oscillation_table(osc));
  return r;
}

inline WeightPair weight_pair(const Context& c) {
  return WeightPair(c.fixture("w1"), c.fixture("w2"), c.cfg.exponents);
}

inline RunResult run_weights(const Context& c) {
  const WeightPair pair = weight_pair(c);
  const auto cubes = c.family();
  const WeightReport w = weight_report(pair, cubes, c.number("hypothesis_cap", 1e6));
  const ApqResult id1 = apq_check(pair.w1, c.cfg.exponents.p1, std::max(c.cfg.exponents.p1, c.cfg.exponents.q), cubes);
  const ApqResult id2 = apq_check(pair.w2, c.cfg.exponents.p2, std::max(c.cfg.exponents.p2, c.cfg.exponents.q), cubes);
  RunResult r;
  r.report = to_json(w, c.dim);
  r.report["apq_identity_gap"] = {{"w1", id1.identity_gap}, {"w2", id2.identity_gap}};
  r.report["family_size"] = cubes.size();
  Table t;
  t.columns = {"class", "value [1]", "worst_center0 [length]"};
  if (c.dim == 2) t.columns.push_back("worst_center1 [length]");
  t.columns.push_back("worst_side [length]");
  for (const auto& [tag, rec] : w.ap_constants) {
    std::vector<std::string> row{tag, Table::cell(rec.value)};
    for (auto& cell : cube_cells(rec.worst, c.dim)) row.push_back(cell);
    t.rows.push_back(std::move(row));
  }
  r.tables.emplace_back("weights.csv", std::move(t));
  return r;
}

inline RunResult run_lemma1(const Context& c) {
  const WeightPair pair = weight_pair(c);
  const ExponentConfig& e = pair.cfg;
  const auto cubes = c.family();
  const Lemma1Report rep = lemma1_check(pair, cubes, c.number("hypothesis_cap", 1e6));
  RunResult r;
  r.report = to_json(rep, c.dim);
  r.report["family_size"] = cubes.size();

  const SampledFunction W1 = map(pair.w1, [&](double x) { return std::pow(x, e.p1 * e.q / e.p); });
  const SampledFunction W2 = map(pair.w2, [&](double x) { return std::pow(x, e.p2 * e.q / e.p); });
  const auto h1 = ap_family(W1, e.p, cubes), h2 = ap_family(W2, e.p, cubes);
  const auto lhs = vector_apq_family(pair, cubes);
  const auto rhs = vector_ap_family(WeightPair(W1, W2, e), cubes);
  const auto mu = ap_family(pair.mu(), e.p, cubes);
  Table t = cube_columns(c.dim);
  for (const char* col : {"W1_Ap [1]", "W2_Ap [1]", "w_APq [1]", "W_AP [1]", "mu_Ap [1]", "mu_Ap_bound [1]"})
    t.columns.push_back(col);
  for (std::size_t k = 0; k < cubes.size(); ++k) {
    auto row = cube_cells(cubes[k], c.dim);
    const double bound = std::pow(h1.per_cube[k], e.p / e.p1) * std::pow(h2.per_cube[k], e.p / e.p2);
    for (double v : {h1.per_cube[k], h2.per_cube[k], lhs.per_cube[k], rhs.per_cube[k], mu.per_cube[k], bound})
      row.push_back(Table::cell(v));
    t.rows.push_back(std::move(row));
  }
  r.tables.emplace_back("lemma1.csv", std::move(t));
  return r;
}

/// f random on a small cube and g positive on a large cube, normalized to
/// unit L^p1 and L^p2 norm.
inline std::vector<std::pair<SampledFunction, SampledFunction>> unit_ball_pairs(const GridSpec& grid,
                                                                                const ExponentConfig& e,
                                                                                const Cube& f_support,
                                                                                const Cube& g_support,
                                                                                std::size_t count,
                                                                                std::uint64_t seed) {
  std::vector<std::pair<SampledFunction, SampledFunction>> out;
  for (std::size_t k = 0; k < count; ++k) {
    const SampledFunction f = fixtures::random(grid, f_support, seed * 1000003ULL + 2 * k);
    const SampledFunction u = fixtures::random(grid, g_support, seed * 1000003ULL + 2 * k + 1, 0.5);
    const SampledFunction ind = fixtures::indicator(grid, g_support);
    const SampledFunction g = zip(u, ind, [](double a, double s) { return s * (1.0 + a); });
    out.emplace_back((1.0 / lq_norm(f, e.p1)) * f, (1.0 / lq_norm(g, e.p2)) * g);
  }
  return out;
}

inline RunResult run_fkr(const Context& c) {
  const ExponentConfig& e = c.cfg.exponents;
  const auto b = c.fixture("b");
  const auto weight = c.optional_fixture("weight");
  KernelParams k = c.kernel();
  if (!k.delta) k.delta = 4.0 * c.grid.h;
  const Cube f_support = c.has("f_support") ? c.cube("f_support") : Cube{c.grid.center(), 2.0};
  const Cube g_support = c.has("g_support") ? c.cube("g_support") : Cube{c.grid.center(), c.grid.box_side()};
  const auto count = static_cast<std::size_t>(c.number("pairs", 20.0));
  const auto pairs = unit_ball_pairs(c.grid, e, f_support, g_support, count, c.cfg.seed);
  const BilinearOperator op(c.grid, k, c.cfg.mode);
  std::vector<SampledFunction> outputs;
  for (const auto& [f, g] : pairs) outputs.push_back(commutator(b, f, g, op, 1));
  const auto radii = c.numbers("radii");
  const auto shifts = c.points("shifts");
  const FkrReport rep = fkr_moduli(outputs, e.q, weight ? &*weight : nullptr, radii, shifts);

  std::vector<double> ta, tv, sd, sv;
  for (const auto& [a, v] : rep.tail) {
    ta.push_back(a);
    tv.push_back(v);
  }
  for (const auto& [t, v] : rep.translation) {
    sd.push_back(t);
    sv.push_back(v);
  }
  RunResult r;
  r.report = to_json(rep);
  r.report["delta"] = *k.delta;
  r.report["pairs"] = count;
  r.report["tail_fit"] = fit_json(try_loglog(ta, tv));
  r.report["tail_exponent_expected"] = static_cast<double>(e.dim) - (e.dim - e.alpha) * e.q;
  if (sd.size() >= 2) {
    const LinearFit lf = fit_line(sd, sv);
    r.report["translation_fit"] = {{"slope", lf.slope}, {"intercept", lf.intercept}, {"r_squared", lf.r_squared}};
  }
  Table tail;
  tail.columns = {"radius [length]", "tail_mass [Lq^q]"};
  for (const auto& [a, v] : rep.tail) tail.add(a, v);
  Table tr;
  tr.columns = {"shift [length]", "translation_modulus [Lq norm]"};
  for (const auto& [t, v] : rep.translation) tr.add(t, v);
  r.tables.emplace_back("fkr_tail.csv", std::move(tail));
  r.tables.emplace_back("fkr_translation.csv", std::move(tr));
  return r;
}

inline RunResult run_witness(const Context& c) {
  const ExponentConfig& e = c.cfg.exponents;
  const auto b = c.fixture("b");
  const Cube q = c.cube("cube");
  const WitnessPair w = witness_pair(b, q, e);
  const WitnessCheck check = verify_witness(b, w, e);
  RunResult r;
  r.report = {{"c0", w.c0},
              {"epsilon", w.epsilon_achieved},
              {"cube_mean", w.cube_mean},
              {"measure", w.measure},
              {"checks", to_json(check)}};
  if (c.has("radii")) {
    const auto radii = c.numbers("radii");
    const auto samples = static_cast<std::size_t>(c.number("samples", 32.0));
    const SlopeReport s = estimate_slopes(b, q, e, radii, samples);
    r.report["slopes"] = to_json(s);
    r.report["slope_targets"] = {{"s1", e.alpha - 2.0 * e.dim}, {"s3", e.alpha - 2.0 * e.dim - 1.0}};
    Table t;
    t.columns = {"radius [length]", "mean_est1 [arb]", "min_est1 [arb]", "mean_est3 [arb]", "lower_constant [1]"};
    for (std::size_t k = 0; k < s.radii.size(); ++k)
      t.add(s.radii[k], s.mean1[k], s.min1[k], s.mean3[k], s.lower_constants[k]);
    r.tables.emplace_back("slopes.csv", std::move(t));
  }
  r.tables.emplace_back("witness_f.csv", function_table(w.f, "f [arb]"));
  return r;
}

inline CubeScheme parse_scheme(const Context& c) {
  const json& s = c.param("scheme");
  const json& kind_j = require_key(s, "kind", "params.scheme");
  const std::string kind = kind_j.is_string() ? kind_j.get<std::string>() : "";
  const auto count = static_cast<std::size_t>(number_or(s, "count", 4.0));
  if (kind == "shrinking" || kind == "growing") {
    const Point center = parse_point(require_key(s, "center", "params.scheme"), c.dim, "scheme.center");
    const double d0 = as_number(require_key(s, "d0", "params.scheme"), "scheme.d0");
    const Point drift = s.contains("drift") ? parse_point(s.at("drift"), c.dim, "scheme.drift") : Point{0.0, 0.0};
    if (s.contains("beta")) {
      // ratio = safety * beta / (2 gamma2)
      const double beta = as_number(s.at("beta"), "scheme.beta");
      const double gamma2 = as_number(require_key(s, "gamma2", "params.scheme"), "scheme.gamma2");
      return CubeScheme::from_bound(kind == "shrinking" ? SchemeKind::shrinking : SchemeKind::growing, center, d0,
                                    beta, gamma2, count, drift, number_or(s, "safety", 0.5));
    }
    const double ratio = as_number(require_key(s, "ratio", "params.scheme"), "scheme.ratio");
    return kind == "shrinking" ? CubeScheme::shrinking(center, d0, ratio, count, drift)
                               : CubeScheme::growing(center, d0, ratio, count, drift);
  }
  if (kind == "translating") {
    const Cube base = parse_cube(require_key(s, "base", "params.scheme"), c.dim, "scheme.base");
    const Point step = parse_point(require_key(s, "step", "params.scheme"), c.dim, "scheme.step");
    const double gamma2 = as_number(require_key(s, "gamma2", "params.scheme"), "scheme.gamma2");
    return CubeScheme::translating(base, step, gamma2, count);
  }
  throw UsageError("config: scheme kind must be shrinking, growing or translating");
}

inline RunResult run_separation(const Context& c) {
  const auto b = c.fixture("b");
  const CubeScheme scheme = parse_scheme(c);
  SeparationOptions opts;
  opts.weight = c.optional_fixture("weight");
  if (c.has("gamma1_grid")) opts.gamma1_grid = c.numbers("gamma1_grid");
  if (c.has("gamma2_factors")) opts.gamma2_factors = c.numbers("gamma2_factors");
  const SeparationReport rep = separation_experiment(b, scheme, c.cfg.exponents, c.kernel(), c.cfg.mode, opts);
  RunResult r;
  r.report = to_json(rep, c.dim);
  r.report["distance_norm"] = opts.weight ? "weighted Lq" : "Lq";
  r.tables.emplace_back("distances.csv", distance_table(rep));
  r.tables.emplace_back("pairs.csv", pair_table(rep));
  return r;
}

inline RunResult run_truncation(const Context& c) {
  const auto b = c.fixture("b"), f = c.fixture("f"), g = c.fixture("g");
  const auto weight = c.optional_fixture("weight");
  std::vector<double> deltas;
  if (c.has("deltas")) {
    deltas = c.numbers("deltas");
  } else {
    const double d0 = as_number(c.param("delta0"), "params.delta0");
    const auto halvings = static_cast<int>(c.number("halvings", 4.0));
    for (int k = 0; k <= halvings; ++k) deltas.push_back(std::ldexp(d0, -k));
  }
  const auto pts = truncation_convergence(b, f, g, c.cfg.exponents, deltas, c.cfg.mode, weight ? &*weight : nullptr);
  bool monotone = true;
  for (std::size_t k = 1; k < pts.size(); ++k)
    if (pts[k].difference > pts[k - 1].difference + 1e-6) monotone = false;
  RunResult r;
  json seq = json::array();
  for (const auto& p : pts) seq.push_back({{"delta", p.delta}, {"difference", p.difference}});
  r.report = {{"sequence", seq},
              {"nonincreasing", monotone},
              {"final_over_first", pts.front().difference > 0.0 ? pts.back().difference / pts.front().difference : 0.0}};
  Table t;
  t.columns = {"delta [length]", "difference [Lq norm]"};
  for (const auto& p : pts) t.add(p.delta, p.difference);
  r.tables.emplace_back("truncation.csv", std::move(t));
  return r;
}

}  // namespace detail

/// Runs one experiment in-process. Results depend only on the config.
inline RunResult run_experiment(const ExperimentConfig& cfg) {
  require_known_experiment(cfg.experiment);
  if (cfg.budget) set_budget_bytes(*cfg.budget);
  cfg.grid.validate(default_budget_bytes());
  const detail::Context c(cfg);
  RunResult r;
  const std::string& e = cfg.experiment;
  if (e == "apply") r = detail::run_apply(c);
  else if (e == "commutator") r = detail::run_commutator(c);
  else if (e == "bmo") r = detail::run_bmo(c);
  else if (e == "cmo") r = detail::run_cmo(c);
  else if (e == "weights") r = detail::run_weights(c);
  else if (e == "lemma1") r = detail::run_lemma1(c);
  else if (e == "fkr") r = detail::run_fkr(c);
  else if (e == "witness") r = detail::run_witness(c);
  else if (e == "separation") r = detail::run_separation(c);
  else r = detail::run_truncation(c);
  json full = {{"experiment", e},
               {"exponents", c.exponents_json()},
               {"grid", {{"dim", cfg.grid.dim},
                         {"origin", point_json(cfg.grid.origin, cfg.grid.dim)},
                         {"h", cfg.grid.h},
                         {"M", cfg.grid.M}}},
               {"mode", to_string(cfg.mode)},
               {"seed", cfg.seed},
               {"results", std::move(r.report)}};
  r.report = std::move(full);
  return r;
}

/// Writes report.json, every table and manifest.json into dir and returns
/// the list of files written.
inline std::vector<std::string> write_outputs(const std::filesystem::path& dir, const ExperimentConfig& cfg,
                                              const RunResult& result, const std::string& config_path,
                                              double wall_seconds, unsigned threads) {
  std::filesystem::create_directories(dir);
  auto put = [&](const std::string& name, const std::string& text) {
    std::ofstream os(dir / name, std::ios::binary);
    if (!os) throw Error("cannot write '" + (dir / name).string() + "'");
    os << text;
  };
  std::vector<std::string> files{"report.json"};
  put("report.json", result.report.dump(2) + "\n");
  for (const auto& [name, table] : result.tables) {
    put(name, table.to_csv());
    files.push_back(name);
  }
  json manifest = {{"tool", "bifrac"},
                   {"version", kVersion},
                   {"compiler", __VERSION__},
                   {"experiment", cfg.experiment},
                   {"config_file", config_path},
                   {"config", cfg.source},
                   {"seed", cfg.seed},
                   {"threads", threads},
                   {"budget_bytes", default_budget_bytes()},
                   {"outputs", files},
                   {"wall_time_seconds", wall_seconds}};
  put("manifest.json", manifest.dump(2) + "\n");
  files.push_back("manifest.json");
  return files;
}

}  // namespace bifrac
