#pragma once

// Muckenhoupt constants A_p, A_{p,q}, vector A_P and A_{P,q} as suprema over
// a finite cube family, the composite weights nu_w and mu_w, and a cube-wise
// verifier for the weight lemma: if w1^(p1 q/p) and w2^(p2 q/p) are in A_p
// then (w1, w2) is in A_{P,q} and mu_w = (w1 w2)^q is in A_p, hence in A_q.
//
// Every constant reported here is a family supremum, a lower bound for the
// true constant over all cubes.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "bifrac/error.hpp"
#include "bifrac/exponents.hpp"
#include "bifrac/grid.hpp"
#include "bifrac/parallel.hpp"

namespace bifrac {

struct WeightPair {
  SampledFunction w1;
  SampledFunction w2;
  ExponentConfig cfg;

  WeightPair(SampledFunction a, SampledFunction b, ExponentConfig c)
      : w1(std::move(a)), w2(std::move(b)), cfg(c) {
    require_same_grid(w1, w2);
    if (!(w1.min() > 0.0) || !(w2.min() > 0.0)) throw Error("weights must be strictly positive");
  }

  /// w1^(p/p1) w2^(p/p2)
  SampledFunction nu() const {
    return zip(w1, w2, [&](double a, double b) { return std::pow(a, cfg.p / cfg.p1) * std::pow(b, cfg.p / cfg.p2); });
  }
  /// w1^q w2^q
  SampledFunction mu() const {
    return zip(w1, w2, [&](double a, double b) { return std::pow(a * b, cfg.q); });
  }
};

/// Supremum over a family together with the per-cube values it came from.
struct FamilyConstant {
  double value = 0.0;
  std::size_t worst = 0;
  std::vector<double> per_cube;
};

namespace detail {

/// Mean of w^e over each cube.
inline std::vector<double> power_means(const SampledFunction& w, double e, std::span<const Cube> cubes) {
  std::vector<double> powered(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) powered[i] = std::pow(w[i], e);
  const SampledFunction pw(w.grid(), std::move(powered));
  std::vector<double> out(cubes.size());
  parallel_for(cubes.size(), [&](std::size_t k) { out[k] = cube_average(pw, cubes[k]); });
  return out;
}

inline FamilyConstant supremum(std::vector<double> per_cube) {
  if (per_cube.empty()) throw Error("empty cube family");
  FamilyConstant c;
  c.value = per_cube[0];
  for (std::size_t k = 1; k < per_cube.size(); ++k)
    if (per_cube[k] > c.value) {
      c.value = per_cube[k];
      c.worst = k;
    }
  c.per_cube = std::move(per_cube);
  return c;
}

inline void require_positive(const SampledFunction& w) {
  if (!(w.min() > 0.0)) throw Error("weight must be positive on every node");
}

}  // namespace detail

/// Per cube (mean w)(mean w^(1-p'))^(p/p').
inline FamilyConstant ap_family(const SampledFunction& w, double p, std::span<const Cube> cubes) {
  if (!(p > 1.0)) throw Error("A_p requires p > 1");
  detail::require_positive(w);
  const double pd = dual(p);
  const auto m1 = detail::power_means(w, 1.0, cubes);
  const auto m2 = detail::power_means(w, 1.0 - pd, cubes);
  std::vector<double> v(cubes.size());
  for (std::size_t k = 0; k < v.size(); ++k) v[k] = m1[k] * std::pow(m2[k], p / pd);
  return detail::supremum(std::move(v));
}

inline double ap_constant(const SampledFunction& w, double p, std::span<const Cube> cubes) {
  return ap_family(w, p, cubes).value;
}

/// Per cube (mean w^q)(mean w^(-p'))^(q/p'), 1 < p <= q < inf.
inline FamilyConstant apq_family(const SampledFunction& w, double p, double q, std::span<const Cube> cubes) {
  if (!(p > 1.0 && p <= q && std::isfinite(q))) throw Error("A_{p,q} requires 1 < p <= q < inf");
  detail::require_positive(w);
  const double pd = dual(p);
  const auto m1 = detail::power_means(w, q, cubes);
  const auto m2 = detail::power_means(w, -pd, cubes);
  std::vector<double> v(cubes.size());
  for (std::size_t k = 0; k < v.size(); ++k) v[k] = m1[k] * std::pow(m2[k], q / pd);
  return detail::supremum(std::move(v));
}

struct ApqResult {
  double value = 0.0;
  std::size_t worst = 0;
  /// [w^q]_{A_{1+q/p'}} on the same family and its relative gap to value.
  double identity_value = 0.0;
  double identity_gap = 0.0;
};

/// A_{p,q} constant cross-checked against the identity
/// [w]_{A_{p,q}} = [w^q]_{A_{1 + q/p'}}.
inline ApqResult apq_check(const SampledFunction& w, double p, double q, std::span<const Cube> cubes) {
  const FamilyConstant direct = apq_family(w, p, q, cubes);
  const SampledFunction wq = map(w, [q](double x) { return std::pow(x, q); });
  const double via = ap_constant(wq, 1.0 + q / dual(p), cubes);
  return {direct.value, direct.worst, via, std::abs(via - direct.value) / direct.value};
}

inline double apq_constant(const SampledFunction& w, double p, double q, std::span<const Cube> cubes) {
  return apq_family(w, p, q, cubes).value;
}

/// Per cube (mean nu_w)(mean w1^(1-p1'))^(p/p1')(mean w2^(1-p2'))^(p/p2').
inline FamilyConstant vector_ap_family(const WeightPair& pair, std::span<const Cube> cubes) {
  const ExponentConfig& c = pair.cfg;
  const double d1 = c.p1_dual(), d2 = c.p2_dual();
  const auto a = detail::power_means(pair.nu(), 1.0, cubes);
  const auto b = detail::power_means(pair.w1, 1.0 - d1, cubes);
  const auto e = detail::power_means(pair.w2, 1.0 - d2, cubes);
  std::vector<double> v(cubes.size());
  for (std::size_t k = 0; k < v.size(); ++k) v[k] = a[k] * std::pow(b[k], c.p / d1) * std::pow(e[k], c.p / d2);
  return detail::supremum(std::move(v));
}

inline double vector_ap_constant(const WeightPair& pair, std::span<const Cube> cubes) {
  return vector_ap_family(pair, cubes).value;
}

/// Per cube (mean mu_w)(mean w1^(-p1'))^(q/p1')(mean w2^(-p2'))^(q/p2').
inline FamilyConstant vector_apq_family(const WeightPair& pair, std::span<const Cube> cubes) {
  const ExponentConfig& c = pair.cfg;
  const double d1 = c.p1_dual(), d2 = c.p2_dual();
  const auto a = detail::power_means(pair.mu(), 1.0, cubes);
  const auto b = detail::power_means(pair.w1, -d1, cubes);
  const auto e = detail::power_means(pair.w2, -d2, cubes);
  std::vector<double> v(cubes.size());
  for (std::size_t k = 0; k < v.size(); ++k) v[k] = a[k] * std::pow(b[k], c.q / d1) * std::pow(e[k], c.q / d2);
  return detail::supremum(std::move(v));
}

inline double vector_apq_constant(const WeightPair& pair, std::span<const Cube> cubes) {
  return vector_apq_family(pair, cubes).value;
}

/// A constant with the cube where the family supremum is attained.
struct ConstantRecord {
  double value = 0.0;
  Cube worst;
};

/// (rhs - lhs) / |rhs|: nonnegative when lhs <= rhs.
inline double relative_slack(double lhs, double rhs) {
  return (rhs - lhs) / std::max(std::abs(rhs), std::numeric_limits<double>::min());
}

struct Lemma1Report {
  bool hypothesis_satisfied = false;
  std::string status;
  double hypothesis_cap = 0.0;
  /// [w_i^(p_i q/p)]_{A_p}
  ConstantRecord hypothesis1, hypothesis2;

  // (i): per cube, A_{P,q} product of w <= A_P product of the lifted pair.
  ConstantRecord apq_of_w;
  ConstantRecord ap_of_lifted;
  double chain_min_slack = 0.0;
  Cube chain_worst;
  bool chain_holds = false;

  // (ii): [mu_w]_{A_p} <= [W1]_{A_p}^(p/p1) [W2]_{A_p}^(p/p2), both as
  // constants and cube by cube.
  ConstantRecord mu_ap;
  double mu_ap_bound = 0.0;
  double constant_slack = 0.0;
  double cubewise_min_slack = 0.0;
  Cube cubewise_worst;
  bool constant_holds = false;

  // A_p subset of A_q for q > p.
  ConstantRecord mu_aq;
  bool mu_aq_holds = false;

  // Consequences of A_{P,q} membership: w_i^(-p_i') in A_{2 p_i'} and
  // mu_w in A_{2q}; reported, not asserted.
  double dual_weight1_a2p = 0.0;
  double dual_weight2_a2p = 0.0;
  double mu_a2q = 0.0;
};

struct WeightReport {
  std::map<std::string, ConstantRecord> ap_constants;
  Lemma1Report lemma1;
};

inline constexpr double kLemmaSlackTolerance = 1e-9;

/// Cube-wise check of both inequality chains of the weight lemma on the
/// family. Hypothesis constants above `hypothesis_cap` (or non-finite) are
/// treated as blow-up: no verdict is given.
inline Lemma1Report lemma1_check(const WeightPair& pair, std::span<const Cube> cubes,
                                 double hypothesis_cap = 1e6) {
  const ExponentConfig& c = pair.cfg;
  Lemma1Report r;
  r.hypothesis_cap = hypothesis_cap;
  const SampledFunction W1 = map(pair.w1, [&](double x) { return std::pow(x, c.p1 * c.q / c.p); });
  const SampledFunction W2 = map(pair.w2, [&](double x) { return std::pow(x, c.p2 * c.q / c.p); });
  const FamilyConstant h1 = ap_family(W1, c.p, cubes);
  const FamilyConstant h2 = ap_family(W2, c.p, cubes);
  r.hypothesis1 = {h1.value, cubes[h1.worst]};
  r.hypothesis2 = {h2.value, cubes[h2.worst]};
  auto ok = [&](double v) { return std::isfinite(v) && v <= hypothesis_cap; };
  if (!ok(h1.value) || !ok(h2.value)) {
    r.status = "hypothesis not satisfied";
    return r;
  }
  r.hypothesis_satisfied = true;

  const FamilyConstant lhs = vector_apq_family(pair, cubes);
  const FamilyConstant rhs = vector_ap_family(WeightPair(W1, W2, c), cubes);
  r.apq_of_w = {lhs.value, cubes[lhs.worst]};
  r.ap_of_lifted = {rhs.value, cubes[rhs.worst]};
  r.chain_min_slack = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < cubes.size(); ++k) {
    const double s = relative_slack(lhs.per_cube[k], rhs.per_cube[k]);
    if (s < r.chain_min_slack) {
      r.chain_min_slack = s;
      r.chain_worst = cubes[k];
    }
  }
  r.chain_holds = r.chain_min_slack >= -kLemmaSlackTolerance;

  const SampledFunction mu = pair.mu();
  const FamilyConstant mu_ap = ap_family(mu, c.p, cubes);
  r.mu_ap = {mu_ap.value, cubes[mu_ap.worst]};
  r.mu_ap_bound = std::pow(h1.value, c.p / c.p1) * std::pow(h2.value, c.p / c.p2);
  r.constant_slack = relative_slack(mu_ap.value, r.mu_ap_bound);
  r.cubewise_min_slack = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < cubes.size(); ++k) {
    const double bound = std::pow(h1.per_cube[k], c.p / c.p1) * std::pow(h2.per_cube[k], c.p / c.p2);
    const double s = relative_slack(mu_ap.per_cube[k], bound);
    if (s < r.cubewise_min_slack) {
      r.cubewise_min_slack = s;
      r.cubewise_worst = cubes[k];
    }
  }
  r.constant_holds = r.constant_slack >= -kLemmaSlackTolerance && r.cubewise_min_slack >= -kLemmaSlackTolerance;

  const FamilyConstant mu_aq = ap_family(mu, c.q, cubes);
  r.mu_aq = {mu_aq.value, cubes[mu_aq.worst]};
  r.mu_aq_holds = std::isfinite(mu_aq.value) && relative_slack(mu_aq.value, mu_ap.value) >= -kLemmaSlackTolerance;

  const double d1 = c.p1_dual(), d2 = c.p2_dual();
  r.dual_weight1_a2p = ap_constant(map(pair.w1, [&](double x) { return std::pow(x, -d1); }), 2.0 * d1, cubes);
  r.dual_weight2_a2p = ap_constant(map(pair.w2, [&](double x) { return std::pow(x, -d2); }), 2.0 * d2, cubes);
  r.mu_a2q = ap_constant(mu, 2.0 * c.q, cubes);
  r.status = r.chain_holds && r.constant_holds && r.mu_aq_holds ? "verified" : "violated";
  return r;
}

/// Every weight-class constant of the pair plus the lemma verdict.
inline WeightReport weight_report(const WeightPair& pair, std::span<const Cube> cubes, double hypothesis_cap = 1e6) {
  const ExponentConfig& c = pair.cfg;
  WeightReport r;
  auto record = [&](const FamilyConstant& fc) { return ConstantRecord{fc.value, cubes[fc.worst]}; };
  r.ap_constants["A_p1[w1]"] = record(ap_family(pair.w1, c.p1, cubes));
  r.ap_constants["A_p2[w2]"] = record(ap_family(pair.w2, c.p2, cubes));
  r.ap_constants["A_p1q[w1]"] = record(apq_family(pair.w1, c.p1, std::max(c.p1, c.q), cubes));
  r.ap_constants["A_p2q[w2]"] = record(apq_family(pair.w2, c.p2, std::max(c.p2, c.q), cubes));
  r.ap_constants["A_P[w]"] = record(vector_ap_family(pair, cubes));
  r.ap_constants["A_Pq[w]"] = record(vector_apq_family(pair, cubes));
  r.ap_constants["A_2p[nu]"] = record(ap_family(pair.nu(), 2.0 * c.p, cubes));
  r.ap_constants["A_q[mu]"] = record(ap_family(pair.mu(), c.q, cubes));
  r.lemma1 = lemma1_check(pair, cubes, hypothesis_cap);
  return r;
}

}  // namespace bifrac
