#pragma once

// JSON and CSV serialization of experiment results.

#include <cstddef>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bifrac/compactness.hpp"
#include "bifrac/grid.hpp"
#include "bifrac/oscillation.hpp"
#include "bifrac/weights.hpp"

namespace bifrac {

using json = nlohmann::json;

/// Rows of preformatted cells under a header naming each column and its unit.
struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  static std::string cell(double v) { return format_double(v); }
  static std::string cell(std::size_t v) { return std::to_string(v); }
  static std::string cell(const std::string& v) { return v; }
  static std::string cell(const char* v) { return v; }

  template <typename... Cells>
  void add(const Cells&... cells) {
    rows.push_back({cell(cells)...});
  }

  std::string to_csv() const {
    std::ostringstream os;
    for (std::size_t k = 0; k < columns.size(); ++k) os << (k ? "," : "") << columns[k];
    os << '\n';
    for (const auto& r : rows) {
      for (std::size_t k = 0; k < r.size(); ++k) os << (k ? "," : "") << r[k];
      os << '\n';
    }
    return os.str();
  }
};

inline json point_json(const Point& p, int dim) {
  json a = json::array();
  for (int k = 0; k < dim; ++k) a.push_back(p[k]);
  return a;
}

inline json cube_json(const Cube& c, int dim) { return {{"center", point_json(c.center, dim)}, {"side", c.side}}; }

/// One row per node: coordinates then value.
inline Table function_table(const SampledFunction& f, const std::string& value_column) {
  const GridSpec& g = f.grid();
  Table t;
  t.columns = {"x0 [length]"};
  if (g.dim == 2) t.columns.push_back("x1 [length]");
  t.columns.push_back(value_column);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const Point x = g.node(i);
    if (g.dim == 1)
      t.add(x[0], f[i]);
    else
      t.add(x[0], x[1], f[i]);
  }
  return t;
}

inline Table cube_columns(int dim) {
  Table t;
  t.columns = {"center0 [length]"};
  if (dim == 2) t.columns.push_back("center1 [length]");
  t.columns.push_back("side [length]");
  return t;
}

inline std::vector<std::string> cube_cells(const Cube& c, int dim) {
  std::vector<std::string> r{Table::cell(c.center[0])};
  if (dim == 2) r.push_back(Table::cell(c.center[1]));
  r.push_back(Table::cell(c.side));
  return r;
}

// ---------------------------------------------------------------------------
// Oscillation

inline json to_json(const OscillationReport& r, int dim) {
  json j;
  j["bmo_norm"] = r.bmo_norm;
  j["bmo_norm_label"] = "family supremum (lower bound)";
  auto scales = [](const std::vector<ScaleModulus>& v) {
    json a = json::array();
    for (const auto& m : v) a.push_back({{"volume", m.volume}, {"modulus", m.modulus}});
    return a;
  };
  j["small_scale"] = scales(r.small_scale);
  j["large_scale"] = scales(r.large_scale);
  json t = json::array();
  for (const auto& m : r.translation)
    t.push_back({{"shift", point_json(m.shift, dim)}, {"distance", m.distance}, {"modulus", m.modulus}});
  j["translation"] = t;
  return j;
}

/// One row per (kind, parameter, modulus); the parameter is the cube volume
/// for scale moduli and |y| for translation moduli.
inline Table oscillation_table(const OscillationReport& r) {
  Table t;
  t.columns = {"kind", "parameter [volume or length]", "modulus [1]"};
  for (const auto& m : r.small_scale) t.add("small_scale", m.volume, m.modulus);
  for (const auto& m : r.large_scale) t.add("large_scale", m.volume, m.modulus);
  for (const auto& m : r.translation) t.add("translation", m.distance, m.modulus);
  return t;
}

// ---------------------------------------------------------------------------
// Weights

inline json to_json(const ConstantRecord& c, int dim) {
  return {{"value", c.value}, {"worst_cube", cube_json(c.worst, dim)}};
}

inline json to_json(const Lemma1Report& r, int dim) {
  json j;
  j["status"] = r.status;
  j["hypothesis_satisfied"] = r.hypothesis_satisfied;
  j["hypothesis_cap"] = r.hypothesis_cap;
  j["hypothesis"] = {{"W1_Ap", to_json(r.hypothesis1, dim)}, {"W2_Ap", to_json(r.hypothesis2, dim)}};
  if (!r.hypothesis_satisfied) return j;
  j["i"] = {{"apq_of_w", to_json(r.apq_of_w, dim)},
            {"ap_of_lifted_pair", to_json(r.ap_of_lifted, dim)},
            {"cubewise_min_slack", r.chain_min_slack},
            {"worst_cube", cube_json(r.chain_worst, dim)},
            {"holds", r.chain_holds}};
  j["ii"] = {{"mu_ap", to_json(r.mu_ap, dim)},
             {"bound", r.mu_ap_bound},
             {"constant_slack", r.constant_slack},
             {"cubewise_min_slack", r.cubewise_min_slack},
             {"worst_cube", cube_json(r.cubewise_worst, dim)},
             {"holds", r.constant_holds}};
  j["mu_aq"] = {{"constant", to_json(r.mu_aq, dim)}, {"holds", r.mu_aq_holds}};
  j["reported_only"] = {{"w1_dual_A2p1dual", r.dual_weight1_a2p},
                        {"w2_dual_A2p2dual", r.dual_weight2_a2p},
                        {"mu_A2q", r.mu_a2q}};
  return j;
}

inline json to_json(const WeightReport& r, int dim) {
  json c = json::object();
  for (const auto& [tag, rec] : r.ap_constants) c[tag] = to_json(rec, dim);
  return {{"constants", c}, {"constants_label", "family supremum (lower bound)"}, {"lemma1", to_json(r.lemma1, dim)}};
}

// ---------------------------------------------------------------------------
// Compactness lab

inline json to_json(const WitnessCheck& c) {
  return {{"support_in_cube", c.support_in_cube}, {"zero_mean", c.zero_mean},
          {"sign_aligned", c.sign_aligned},       {"amplitude_bounded", c.amplitude_bounded},
          {"pairing_error", c.pairing_error},     {"g_norm", c.g_norm},
          {"c0_in_range", c.c0_in_range}};
}

inline json to_json(const FkrReport& r) {
  json tail = json::array(), tr = json::array();
  for (const auto& [a, v] : r.tail) tail.push_back({{"radius", a}, {"value", v}});
  for (const auto& [t, v] : r.translation) tr.push_back({{"shift", t}, {"value", v}});
  return {{"bound", r.bound}, {"tail", tail}, {"translation", tr}};
}

inline json to_json(const SlopeReport& r) {
  return {{"s1", r.s1},
          {"s2", r.s2},
          {"s3", r.s3},
          {"r2_s1", r.r2_s1},
          {"r2_s3", r.r2_s3},
          {"epsilon", r.epsilon},
          {"lower_constant_min", *std::min_element(r.lower_constants.begin(), r.lower_constants.end())},
          {"lower_constant_max", *std::max_element(r.lower_constants.begin(), r.lower_constants.end())}};
}

inline json to_json(const SeparationReport& r, int dim) {
  json j;
  j["scheme"] = to_string(r.kind);
  j["scheme_ratio"] = r.scheme_ratio;
  json cubes = json::array();
  for (const auto& c : r.cubes) cubes.push_back(cube_json(c, dim));
  j["cubes"] = cubes;
  j["epsilons"] = r.epsilons;
  j["epsilon"] = r.epsilon;
  j["c0"] = r.c0s;
  j["norms"] = r.norms;
  j["distances"] = r.distances;
  j["min_distance"] = r.min_distance;
  j["max_distance"] = r.max_distance;
  j["consecutive_distances"] = r.consecutive;
  if (r.gammas_found)
    j["gammas"] = {{"gamma1", r.gamma1}, {"gamma2", r.gamma2}, {"gamma3", r.gamma3}, {"beta", r.beta}};
  else
    j["gammas"] = "not found";
  j["gamma_search_best"] = {{"gamma1", r.gamma1}, {"gamma2", r.gamma2}, {"gamma3", r.gamma3}, {"beta", r.beta}};
  j["annulus_mass"] = r.annulus_mass;
  j["outer_mass"] = r.outer_mass;
  j["annulus_clipped_by_box"] = r.annulus_clipped;
  j["ratio_condition"] = r.ratio_condition;
  json pairs = json::array();
  for (const auto& p : r.pairs)
    pairs.push_back({{"k", p.k},
                     {"m", p.m},
                     {"distance", p.distance},
                     {"annulus_mass", p.annulus_mass},
                     {"sliver_mass", p.sliver_mass},
                     {"exterior_mass", p.exterior_mass},
                     {"sliver_ratio", p.sliver_ratio},
                     {"lower_bound", p.lower_bound},
                     {"chain_floor", p.chain_floor},
                     {"gsets_hold", p.gsets_hold},
                     {"g3_holds", p.g3_holds},
                     {"c2_holds", p.c2_holds},
                     {"thresholds_met", p.thresholds_met}});
  j["pairs"] = pairs;
  return j;
}

inline Table distance_table(const SeparationReport& r) {
  Table t;
  t.columns = {"j", "k", "distance [Lq norm]"};
  for (std::size_t j = 0; j < r.distances.size(); ++j)
    for (std::size_t k = 0; k < r.distances.size(); ++k) t.add(j, k, r.distances[j][k]);
  return t;
}

inline Table pair_table(const SeparationReport& r) {
  Table t;
  t.columns = {"k",
               "m",
               "distance [Lq norm]",
               "annulus_mass [Lq norm]",
               "sliver_mass [Lq norm]",
               "exterior_mass [Lq norm]",
               "lower_bound [Lq norm]",
               "sliver_ratio [1]",
               "gsets_hold [bool]",
               "g3_holds [bool]"};
  for (const auto& p : r.pairs)
    t.add(p.k, p.m, p.distance, p.annulus_mass, p.sliver_mass, p.exterior_mass, p.lower_bound, p.sliver_ratio,
          std::size_t{p.gsets_hold}, std::size_t{p.g3_holds});
  return t;
}

}  // namespace bifrac
