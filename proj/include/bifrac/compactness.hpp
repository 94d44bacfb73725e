#pragma once

// Numerical probes of commutator compactness:
//  - witness pairs (f, g) built on a cube where the symbol oscillates,
//  - far-field decay slopes of I((b - b_Q) f, g) and I(f, g),
//  - Frechet-Kolmogorov-Riesz moduli (bound, tails, translations) of a family,
//  - separation of commutator images along shrinking / growing / translating
//    cube sequences, with the annulus sets G, G1, G2 and the triangle chain,
//  - convergence of smoothly truncated commutators as delta -> 0,
//  - the translation split F(x + t) - F(x) = I(x, t) + II(x, t).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bifrac/error.hpp"
#include "bifrac/exponents.hpp"
#include "bifrac/fit.hpp"
#include "bifrac/grid.hpp"
#include "bifrac/kernel.hpp"
#include "bifrac/operator.hpp"
#include "bifrac/oscillation.hpp"
#include "bifrac/parallel.hpp"

namespace bifrac {

// ---------------------------------------------------------------------------
// Witness pairs

struct WitnessPair {
  SampledFunction f;
  SampledFunction g;
  Cube cube;
  double c0 = 0.0;
  double epsilon_achieved = 0.0;  // mean oscillation of b on the cube
  double cube_mean = 0.0;         // b_Q
  double measure = 0.0;           // discrete |Q|
};

/// sgn with sgn(0) = 0.
inline double sign_of(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

/// f = |Q|^(-1/p1) (sgn(b - b_Q) - c0) chi_Q with c0 the mean of the sign
/// pattern over Q, and g = chi_Q / |Q|^(1/p2).
inline WitnessPair witness_pair(const SampledFunction& b, const Cube& q, const ExponentConfig& cfg) {
  const GridSpec& grid = b.grid();
  const CubeCells cells = cells_of(grid, q);
  const double avg = cube_average(b, cells);
  const double eps = mean_oscillation(b, cells);
  if (!(eps > 0.0)) throw Error("zero oscillation; witness undefined");
  double sign_sum = 0.0;
  cells.for_each(grid, [&](std::size_t i) { sign_sum += sign_of(b[i] - avg); });
  const double c0 = sign_sum / static_cast<double>(cells.count);
  const double amp_f = std::pow(cells.measure, -1.0 / cfg.p1);
  const double amp_g = std::pow(cells.measure, -1.0 / cfg.p2);
  std::vector<double> f(grid.size(), 0.0), g(grid.size(), 0.0);
  cells.for_each(grid, [&](std::size_t i) {
    f[i] = amp_f * (sign_of(b[i] - avg) - c0);
    g[i] = amp_g;
  });
  return {SampledFunction(grid, std::move(f)), SampledFunction(grid, std::move(g)), q, c0, eps, avg, cells.measure};
}

struct WitnessCheck {
  bool support_in_cube = false;
  double zero_mean = 0.0;         // |sum f h^n|
  bool sign_aligned = false;      // (b - b_Q) f >= 0 node-wise
  bool amplitude_bounded = false; // |f| <= 2 |Q|^(-1/p1)
  double pairing_error = 0.0;     // relative error of the pairing identity
  double g_norm = 0.0;            // ||g||_{L^p2}
  bool c0_in_range = false;       // -1 < c0 < 1
};

/// Re-derives every listed property of a witness pair from scratch.
inline WitnessCheck verify_witness(const SampledFunction& b, const WitnessPair& w, const ExponentConfig& cfg) {
  const GridSpec& grid = b.grid();
  const CubeCells cells = cells_of(grid, w.cube);
  const double avg = cube_average(b, cells);
  const double amp = std::pow(cells.measure, -1.0 / cfg.p1);
  WitnessCheck c;
  c.support_in_cube = true;
  c.sign_aligned = true;
  c.amplitude_bounded = true;
  double mean = 0.0, pairing = 0.0, abs_dev = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const bool inside = cells.contains(grid, i);
    if (!inside && (w.f[i] != 0.0 || w.g[i] != 0.0)) c.support_in_cube = false;
    if ((b[i] - avg) * w.f[i] < 0.0) c.sign_aligned = false;
    if (std::abs(w.f[i]) > 2.0 * amp) c.amplitude_bounded = false;
    mean += w.f[i];
    pairing += (b[i] - avg) * w.f[i];
    if (inside) abs_dev += std::abs(b[i] - avg);
  }
  const double hn = grid.cell_volume();
  c.zero_mean = std::abs(mean * hn);
  const double expected = amp * abs_dev * hn;
  c.pairing_error = std::abs(pairing * hn - expected) / expected;
  c.g_norm = lq_norm(w.g, cfg.p2);
  c.c0_in_range = w.c0 > -1.0 && w.c0 < 1.0;
  return c;
}

// ---------------------------------------------------------------------------
// Far-field decay slopes

struct SlopeReport {
  double s1 = 0.0;  // slope of the annulus mean of |I((b - b_Q) f, g)|
  double s2 = 0.0;  // slope of its annulus minimum
  double s3 = 0.0;  // slope of the annulus mean of |I(f, g)|
  double r2_s1 = 0.0, r2_s3 = 0.0;
  double epsilon = 0.0;
  std::vector<double> radii, mean1, min1, mean3;
  /// min1 / (eps |Q|^(1/p1' + 1/p2') r^(alpha - 2n)) per radius.
  std::vector<double> lower_constants;
};

/// Points at distance r from c: the two points c +- r in 1D, `samples`
/// equally spaced points on the circle in 2D.
inline std::vector<Point> annulus_points(const Point& c, double r, int dim, std::size_t samples) {
  std::vector<Point> pts;
  if (dim == 1) {
    pts.push_back({c[0] - r, 0.0});
    pts.push_back({c[0] + r, 0.0});
    return pts;
  }
  for (std::size_t k = 0; k < samples; ++k) {
    const double th = 2.0 * std::numbers::pi * (static_cast<double>(k) + 0.5) / static_cast<double>(samples);
    pts.push_back({c[0] + r * std::cos(th), c[1] + r * std::sin(th)});
  }
  return pts;
}

inline SlopeReport estimate_slopes(const SampledFunction& b, const Cube& q, const ExponentConfig& cfg,
                                   std::span<const double> radii, std::size_t samples_per_circle = 32) {
  const GridSpec& grid = b.grid();
  if (grid.dim != cfg.dim) throw Error("exponent dimension does not match grid");
  if (radii.size() < 2) throw Error("slope fit needs at least two radii");
  const WitnessPair w = witness_pair(b, q, cfg);
  const SampledFunction bf = zip(b, w.f, [&](double bv, double fv) { return (bv - w.cube_mean) * fv; });
  const BilinearOperator op(grid, KernelParams{cfg.dim, cfg.alpha, std::nullopt}, ApplyMode::direct);
  const double n = cfg.dim;
  const double inner = 2.0 * std::sqrt(n) * q.side;
  SlopeReport r;
  r.epsilon = w.epsilon_achieved;
  for (double radius : radii) {
    if (!(radius > inner)) throw Error("radius inside 2 sqrt(n) Q");
    const auto pts = annulus_points(q.center, radius, cfg.dim, samples_per_circle);
    for (const Point& x : pts)
      for (int a = 0; a < cfg.dim; ++a)
        if (x[a] < grid.origin[a] || x[a] > grid.origin[a] + grid.box_side())
          throw Error("annulus leaves the grid box");
    const auto v1 = op.apply_at(bf, w.g, pts);
    const auto v3 = op.apply_at(w.f, w.g, pts);
    double m1 = 0.0, lo1 = std::numeric_limits<double>::infinity(), m3 = 0.0;
    for (std::size_t k = 0; k < pts.size(); ++k) {
      m1 += std::abs(v1[k]);
      lo1 = std::min(lo1, std::abs(v1[k]));
      m3 += std::abs(v3[k]);
    }
    r.radii.push_back(radius);
    r.mean1.push_back(m1 / static_cast<double>(pts.size()));
    r.min1.push_back(lo1);
    r.mean3.push_back(m3 / static_cast<double>(pts.size()));
    const double model = w.epsilon_achieved * std::pow(w.measure, cfg.dual_sum()) * std::pow(radius, cfg.alpha - 2.0 * n);
    r.lower_constants.push_back(lo1 / model);
  }
  const LinearFit f1 = fit_loglog(r.radii, r.mean1);
  const LinearFit f2 = fit_loglog(r.radii, r.min1);
  const LinearFit f3 = fit_loglog(r.radii, r.mean3);
  r.s1 = f1.slope;
  r.s2 = f2.slope;
  r.s3 = f3.slope;
  r.r2_s1 = f1.r_squared;
  r.r2_s3 = f3.r_squared;
  return r;
}

// ---------------------------------------------------------------------------
// Frechet-Kolmogorov-Riesz moduli

struct FkrReport {
  double bound = 0.0;                                // sup ||F||_{L^q(w)}
  std::vector<std::pair<double, double>> tail;       // (A, sup int_{|x|>A} |F|^q w)
  std::vector<std::pair<double, double>> translation;  // (|t|, sup ||F(. + t) - F||)
};

namespace detail {
/// F(x + t) with values whose source leaves the box set to 0.
inline SampledFunction translate(const SampledFunction& f, const Point& t) {
  const GridSpec& grid = f.grid();
  long k[kMaxDim] = {0, 0};
  for (int a = 0; a < grid.dim; ++a) k[a] = whole_cells(t[a], grid.h);
  std::vector<double> out(grid.size(), 0.0);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    Index idx = grid.index(i);
    bool inside = true;
    for (int a = 0; a < grid.dim; ++a) {
      const long j = static_cast<long>(idx[a]) + k[a];
      if (j < 0 || j >= static_cast<long>(grid.M)) inside = false;
      idx[a] = static_cast<std::size_t>(j);
    }
    if (inside) out[i] = f[grid.flat(idx)];
  }
  return SampledFunction(grid, std::move(out));
}
}  // namespace detail

/// Translation by whole grid cells (error otherwise); radii measured from
/// the coordinate origin.
inline FkrReport fkr_moduli(std::span<const SampledFunction> outputs, double q, const SampledFunction* w,
                            std::span<const double> radii, std::span<const Point> shifts) {
  if (outputs.empty()) throw Error("empty output family");
  const GridSpec& grid = outputs.front().grid();
  for (const auto& f : outputs) {
    if (!(f.grid() == grid)) throw Error("grid mismatch");
  }
  FkrReport r;
  for (const auto& f : outputs) r.bound = std::max(r.bound, w ? lq_norm(f, q, *w) : lq_norm(f, q));
  for (double a : radii) {
    std::vector<char> mask(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i)
      mask[i] = distance_squared(grid.node(i), Point{0.0, 0.0}, grid.dim) > a * a;
    double sup = 0.0;
    for (const auto& f : outputs) sup = std::max(sup, std::pow(lq_norm_masked(f, q, mask, w), q));
    r.tail.emplace_back(a, sup);
  }
  for (const Point& t : shifts) {
    double sup = 0.0;
    for (const auto& f : outputs) {
      const SampledFunction d = detail::translate(f, t) - f;
      sup = std::max(sup, w ? lq_norm(d, q, *w) : lq_norm(d, q));
    }
    r.translation.emplace_back(std::sqrt(distance_squared(t, Point{0.0, 0.0}, grid.dim)), sup);
  }
  return r;
}

// ---------------------------------------------------------------------------
// Cube sequences

enum class SchemeKind { shrinking, growing, translating };

inline const char* to_string(SchemeKind k) {
  switch (k) {
    case SchemeKind::shrinking: return "shrinking";
    case SchemeKind::growing: return "growing";
    case SchemeKind::translating: return "translating";
  }
  return "?";
}

struct CubeScheme {
  SchemeKind kind = SchemeKind::shrinking;
  /// Successive side ratio: d_{j+1}/d_j (shrinking) or d_j/d_{j+1} (growing).
  double ratio = 0.5;
  /// Translating schemes: balls |x - y_j| < gamma2 * d are pairwise disjoint.
  double gamma2 = 0.0;
  std::vector<Cube> cubes;

  /// Side d0 * ratio^j, center + j * drift.
  static CubeScheme shrinking(const Point& center, double d0, double ratio, std::size_t count,
                              const Point& drift = {0.0, 0.0}) {
    CubeScheme s{SchemeKind::shrinking, ratio, 0.0, {}};
    for (std::size_t j = 0; j < count; ++j)
      s.cubes.push_back({shifted(center, drift, j), d0 * std::pow(ratio, static_cast<double>(j))});
    s.validate();
    return s;
  }

  /// Side d0 / ratio^j, center + j * drift.
  static CubeScheme growing(const Point& center, double d0, double ratio, std::size_t count,
                            const Point& drift = {0.0, 0.0}) {
    CubeScheme s{SchemeKind::growing, ratio, 0.0, {}};
    for (std::size_t j = 0; j < count; ++j)
      s.cubes.push_back({shifted(center, drift, j), d0 / std::pow(ratio, static_cast<double>(j))});
    s.validate();
    return s;
  }

  static CubeScheme translating(const Cube& base, const Point& step, double gamma2, std::size_t count) {
    CubeScheme s{SchemeKind::translating, 1.0, gamma2, {}};
    for (std::size_t j = 0; j < count; ++j) s.cubes.push_back({shifted(base.center, step, j), base.side});
    s.validate();
    return s;
  }

  /// Shrinking or growing scheme with ratio = safety * beta / (2 gamma2).
  static CubeScheme from_bound(SchemeKind kind, const Point& center, double d0, double beta, double gamma2,
                               std::size_t count, const Point& drift = {0.0, 0.0}, double safety = 0.5) {
    if (kind == SchemeKind::translating) throw Error("ratio bound applies to shrinking and growing schemes");
    if (!(safety > 0.0 && safety < 1.0)) throw Error("safety factor must lie in (0, 1)");
    const double ratio = safety * beta / (2.0 * gamma2);
    return kind == SchemeKind::shrinking ? shrinking(center, d0, ratio, count, drift)
                                         : growing(center, d0, ratio, count, drift);
  }

  /// Whether successive side ratios stay below beta / (2 gamma2).
  bool meets_ratio_bound(double beta, double gamma2) const {
    return kind != SchemeKind::translating && ratio < beta / (2.0 * gamma2);
  }

  void validate() const {
    if (cubes.empty()) throw Error("cube scheme is empty");
    switch (kind) {
      case SchemeKind::shrinking:
      case SchemeKind::growing:
        if (!(ratio > 0.0 && ratio < 1.0)) throw Error("scheme ratio must lie in (0, 1)");
        for (std::size_t j = 0; j + 1 < cubes.size(); ++j) {
          const double r = kind == SchemeKind::shrinking ? cubes[j + 1].side / cubes[j].side
                                                         : cubes[j].side / cubes[j + 1].side;
          if (r > ratio * (1.0 + 1e-12)) throw Error("scheme violates its side ratio bound");
        }
        break;
      case SchemeKind::translating:
        if (!(gamma2 > 0.0)) throw Error("translating scheme needs gamma2 > 0");
        for (std::size_t j = 0; j < cubes.size(); ++j)
          for (std::size_t k = j + 1; k < cubes.size(); ++k) {
            const double d = std::sqrt(distance_squared(cubes[j].center, cubes[k].center, kMaxDim));
            if (d < gamma2 * (cubes[j].side + cubes[k].side)) throw Error("translating scheme balls overlap");
          }
        break;
    }
  }

 private:
  static Point shifted(const Point& c, const Point& step, std::size_t j) {
    Point p = c;
    for (int a = 0; a < kMaxDim; ++a) p[a] += static_cast<double>(j) * step[a];
    return p;
  }
};

// ---------------------------------------------------------------------------
// Annulus sets

/// Node sets for a pair of cubes: G is the open annulus
/// gamma1 d < |x - y| < gamma2 d around the outer cube, G2 the exterior
/// |x - y'| > gamma2 d' of the inner cube's ball, G1 = G minus the closed
/// ball, and the sliver G2^c intersected with G.
struct GSets {
  std::vector<char> G, G1, G2, sliver;

  std::size_t count(const std::vector<char>& s) const {
    return static_cast<std::size_t>(std::count(s.begin(), s.end(), char{1}));
  }

  /// G1 == G minus sliver and G1 subset of G2, node by node.
  bool identities_hold() const {
    for (std::size_t i = 0; i < G.size(); ++i) {
      const bool g_minus_sliver = G[i] && !sliver[i];
      if (static_cast<bool>(G1[i]) != g_minus_sliver) return false;
      if (G1[i] && !G2[i]) return false;
    }
    return true;
  }
};

inline GSets make_gsets(const GridSpec& grid, const Cube& outer, const Cube& inner, double gamma1, double gamma2) {
  GSets s;
  const std::size_t n = grid.size();
  s.G.assign(n, 0);
  s.G1.assign(n, 0);
  s.G2.assign(n, 0);
  s.sliver.assign(n, 0);
  const double r1 = gamma1 * outer.side, r2 = gamma2 * outer.side, ri = gamma2 * inner.side;
  for (std::size_t i = 0; i < n; ++i) {
    const Point x = grid.node(i);
    const double dg = std::sqrt(distance_squared(x, outer.center, grid.dim));
    const double di = std::sqrt(distance_squared(x, inner.center, grid.dim));
    const bool in_g = r1 < dg && dg < r2;
    s.G[i] = in_g;
    s.G1[i] = in_g && !(di <= ri);
    s.G2[i] = di > ri;
    s.sliver[i] = !s.G2[i] && s.G[i];
  }
  return s;
}

/// Open annulus a < |x - c| < b.
inline std::vector<char> annulus_mask(const GridSpec& grid, const Point& c, double a, double b) {
  std::vector<char> m(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double d = std::sqrt(distance_squared(grid.node(i), c, grid.dim));
    m[i] = a < d && d < b;
  }
  return m;
}

/// Roles of a pair k < m: G sits around the larger cube, G2 around the
/// smaller one (for translating schemes, around k and m respectively).
inline std::pair<std::size_t, std::size_t> outer_inner(const CubeScheme& s, std::size_t k, std::size_t m) {
  return s.kind == SchemeKind::growing ? std::pair{m, k} : std::pair{k, m};
}

struct GSetRecord {
  std::size_t k = 0, m = 0;
  bool identities = false;     // G1 = G minus sliver and G1 subset of G2
  double sliver_ratio = 0.0;   // |G2^c n G| / |Q_outer|, discrete measures
  bool g3 = false;             // sliver_ratio <= beta^n
};

/// Node-set relations for every pair of the scheme.
inline std::vector<GSetRecord> gset_relations(const GridSpec& grid, const CubeScheme& scheme, double gamma1,
                                              double gamma2, double beta) {
  std::vector<GSetRecord> out;
  const double beta_n = std::pow(beta, grid.dim);
  for (std::size_t k = 0; k < scheme.cubes.size(); ++k)
    for (std::size_t m = k + 1; m < scheme.cubes.size(); ++m) {
      const auto [o, i] = outer_inner(scheme, k, m);
      const GSets s = make_gsets(grid, scheme.cubes[o], scheme.cubes[i], gamma1, gamma2);
      GSetRecord r;
      r.k = k;
      r.m = m;
      r.identities = s.identities_hold();
      r.sliver_ratio = static_cast<double>(s.count(s.sliver)) * grid.cell_volume() / cells_of(grid, scheme.cubes[o]).measure;
      r.g3 = r.sliver_ratio <= beta_n;
      out.push_back(r);
    }
  return out;
}

// ---------------------------------------------------------------------------
// Separation experiment

struct SeparationOptions {
  std::vector<double> gamma1_grid{2.5, 4.0, 8.0, 16.0};
  std::vector<double> gamma2_factors{4.0, 8.0, 16.0};
  /// Distances in L^q(weight) when set, unweighted L^q otherwise.
  std::optional<SampledFunction> weight;
};

struct PairRecord {
  std::size_t k = 0, m = 0;       // sequence indices, k < m
  double distance = 0.0;
  double annulus_mass = 0.0;      // ||F_outer||_{L^q(G)}
  double sliver_mass = 0.0;       // ||F_outer||_{L^q(G2^c n G)}
  double exterior_mass = 0.0;     // ||F_inner||_{L^q(G2)}
  double sliver_ratio = 0.0;      // |G2^c n G| / |Q_outer|
  double lower_bound = 0.0;       // (A^q - S^q)^(1/q) - T
  double chain_floor = 0.0;       // (g3^q - (g3/4)^q)^(1/q) - g3/4
  bool gsets_hold = false;
  bool g3_holds = false;
  bool c2_holds = false;
  bool thresholds_met = false;
};

struct SeparationReport {
  SchemeKind kind = SchemeKind::shrinking;
  double scheme_ratio = 0.0;
  std::vector<Cube> cubes;
  std::vector<double> epsilons, c0s;
  double epsilon = 0.0;
  std::vector<std::vector<double>> distances;
  double min_distance = 0.0, max_distance = 0.0;
  std::vector<double> consecutive;  // distance(j, j+1)
  std::vector<double> norms;        // ||F_j||
  bool gammas_found = false;
  double gamma1 = 0.0, gamma2 = 0.0, gamma3 = 0.0, beta = 0.0;
  std::vector<double> annulus_mass, outer_mass;
  bool annulus_clipped = false;
  bool ratio_condition = false;  // ratio < beta / (2 gamma2)
  std::vector<PairRecord> pairs;
  std::vector<SampledFunction> outputs;
};

namespace detail {
inline bool cube_inside_box(const GridSpec& grid, const Cube& c) {
  for (int a = 0; a < grid.dim; ++a) {
    if (c.center[a] - 0.5 * c.side < grid.origin[a] - 1e-12) return false;
    if (c.center[a] + 0.5 * c.side > grid.origin[a] + grid.box_side() + 1e-12) return false;
  }
  return c.side >= 2.0 * grid.h * (1.0 - 1e-12);
}

inline double masked_mass(const SampledFunction& f, double q, const std::vector<char>& mask,
                          const std::optional<SampledFunction>& w) {
  return lq_norm_masked(f, q, mask, w ? &*w : nullptr);
}
}  // namespace detail

inline SeparationReport separation_experiment(const SampledFunction& b, const CubeScheme& scheme,
                                              const ExponentConfig& cfg, const KernelParams& params, ApplyMode mode,
                                              const SeparationOptions& opts = {}) {
  const GridSpec& grid = b.grid();
  scheme.validate();
  std::size_t feasible = 0;
  while (feasible < scheme.cubes.size() && detail::cube_inside_box(grid, scheme.cubes[feasible])) ++feasible;
  if (feasible < scheme.cubes.size())
    throw Error("cube scheme does not fit the grid box; largest feasible sequence length is " +
                std::to_string(feasible));

  const double q = cfg.q;
  const std::size_t J = scheme.cubes.size();
  SeparationReport r;
  r.kind = scheme.kind;
  r.scheme_ratio = scheme.ratio;
  r.cubes = scheme.cubes;

  std::vector<WitnessPair> witnesses;
  for (const Cube& c : scheme.cubes) witnesses.push_back(witness_pair(b, c, cfg));
  for (const auto& w : witnesses) {
    r.epsilons.push_back(w.epsilon_achieved);
    r.c0s.push_back(w.c0);
  }
  r.epsilon = *std::min_element(r.epsilons.begin(), r.epsilons.end());

  const BilinearOperator op(grid, params, mode);
  r.outputs.reserve(J);
  for (const auto& w : witnesses) r.outputs.push_back(commutator(b, w.f, w.g, op, 1));
  const std::vector<SampledFunction>& F = r.outputs;
  const SampledFunction* wptr = opts.weight ? &*opts.weight : nullptr;
  auto norm = [&](const SampledFunction& f) { return wptr ? lq_norm(f, q, *wptr) : lq_norm(f, q); };

  r.distances.assign(J, std::vector<double>(J, 0.0));
  r.min_distance = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < J; ++i) {
    r.norms.push_back(norm(F[i]));
    for (std::size_t j = i + 1; j < J; ++j) {
      const double d = norm(F[i] - F[j]);
      r.distances[i][j] = r.distances[j][i] = d;
      r.min_distance = std::min(r.min_distance, d);
      r.max_distance = std::max(r.max_distance, d);
    }
  }
  if (J < 2) r.min_distance = 0.0;
  for (std::size_t j = 0; j + 1 < J; ++j) r.consecutive.push_back(r.distances[j][j + 1]);

  // gamma search: maximize the relative gap between gamma3/4 and the
  // largest outer tail.
  double best_score = -std::numeric_limits<double>::infinity();
  for (double g1 : opts.gamma1_grid)
    for (double f2 : opts.gamma2_factors) {
      const double g2 = f2 * g1;
      if (!(g2 > g1 && g1 > 2.0)) continue;
      std::vector<double> ann(J), out(J);
      for (std::size_t j = 0; j < J; ++j) {
        const Cube& c = scheme.cubes[j];
        ann[j] = detail::masked_mass(F[j], q, annulus_mask(grid, c.center, g1 * c.side, g2 * c.side), opts.weight);
        out[j] = detail::masked_mass(F[j], q,
                                     annulus_mask(grid, c.center, g2 * c.side, std::numeric_limits<double>::infinity()),
                                     opts.weight);
      }
      const double g3 = *std::min_element(ann.begin(), ann.end());
      const double tmax = *std::max_element(out.begin(), out.end());
      const double score = g3 > 0.0 ? (g3 / 4.0 - tmax) / g3 : -std::numeric_limits<double>::infinity();
      if (score > best_score) {
        best_score = score;
        r.gamma1 = g1;
        r.gamma2 = g2;
        r.gamma3 = g3;
        r.annulus_mass = ann;
        r.outer_mass = out;
      }
    }
  r.gammas_found = best_score >= 0.0;
  for (const Cube& c : scheme.cubes) {
    Cube ball{c.center, 2.0 * r.gamma2 * c.side};
    if (!detail::cube_inside_box(grid, ball)) r.annulus_clipped = true;
  }

  // beta: half the largest value for which every node set E inside an
  // annulus with |E| < beta^n |Q_j| carries at most gamma3/4.
  const double hn = grid.cell_volume();
  const double thr = std::pow(r.gamma3 / 4.0, q);
  double beta_max = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < J; ++j) {
    const Cube& c = scheme.cubes[j];
    const auto mask = annulus_mask(grid, c.center, r.gamma1 * c.side, r.gamma2 * c.side);
    std::vector<double> contrib;
    for (std::size_t i = 0; i < grid.size(); ++i)
      if (mask[i]) contrib.push_back(std::pow(std::abs(F[j][i]), q) * (wptr ? (*wptr)[i] : 1.0) * hn);
    std::sort(contrib.begin(), contrib.end(), std::greater<>());
    std::size_t m = 0;
    double cum = 0.0;
    while (m < contrib.size() && cum + contrib[m] <= thr) cum += contrib[m++];
    const double frac = static_cast<double>(m + 1) * hn / witnesses[j].measure;
    beta_max = std::min(beta_max, std::pow(frac, 1.0 / grid.dim));
  }
  r.beta = 0.5 * beta_max;
  r.ratio_condition = scheme.kind == SchemeKind::translating || scheme.meets_ratio_bound(r.beta, r.gamma2);

  const double beta_n = std::pow(r.beta, grid.dim);
  const double floor = std::pow(std::pow(r.gamma3, q) - std::pow(r.gamma3 / 4.0, q), 1.0 / q) - r.gamma3 / 4.0;
  for (std::size_t k = 0; k < J; ++k)
    for (std::size_t m = k + 1; m < J; ++m) {
      const auto [outer, inner] = outer_inner(scheme, k, m);
      const GSets s = make_gsets(grid, scheme.cubes[outer], scheme.cubes[inner], r.gamma1, r.gamma2);
      PairRecord p;
      p.k = k;
      p.m = m;
      p.distance = r.distances[k][m];
      p.annulus_mass = detail::masked_mass(F[outer], q, s.G, opts.weight);
      p.sliver_mass = detail::masked_mass(F[outer], q, s.sliver, opts.weight);
      p.exterior_mass = detail::masked_mass(F[inner], q, s.G2, opts.weight);
      p.sliver_ratio = static_cast<double>(s.count(s.sliver)) * hn / witnesses[outer].measure;
      const double inside = std::pow(p.annulus_mass, q) - std::pow(p.sliver_mass, q);
      p.lower_bound = std::pow(std::max(0.0, inside), 1.0 / q) - p.exterior_mass;
      p.chain_floor = floor;
      p.gsets_hold = s.identities_hold();
      p.g3_holds = p.sliver_ratio <= beta_n;
      p.c2_holds = p.sliver_mass <= r.gamma3 / 4.0;
      p.thresholds_met = p.annulus_mass >= r.gamma3 && p.c2_holds && p.exterior_mass <= r.gamma3 / 4.0;
      r.pairs.push_back(p);
    }
  return r;
}

// ---------------------------------------------------------------------------
// Truncation convergence

struct TruncationPoint {
  double delta = 0.0;
  double difference = 0.0;  // ||[b, I^delta](f, g) - [b, I](f, g)||_{L^q(w)}
};

inline std::vector<TruncationPoint> truncation_convergence(const SampledFunction& b, const SampledFunction& f,
                                                           const SampledFunction& g, const ExponentConfig& cfg,
                                                           std::span<const double> deltas,
                                                           ApplyMode mode = ApplyMode::direct,
                                                           const SampledFunction* weight = nullptr) {
  const GridSpec& grid = b.grid();
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    if (deltas[i] < 2.0 * grid.h * (1.0 - 1e-12)) throw Error("under-resolved truncation");
    if (i > 0 && !(deltas[i] < deltas[i - 1])) throw Error("truncation scales must be decreasing");
  }
  const BilinearOperator full(grid, KernelParams{cfg.dim, cfg.alpha, std::nullopt}, mode);
  const SampledFunction exact = commutator(b, f, g, full, 1);
  std::vector<TruncationPoint> out;
  for (double d : deltas) {
    const BilinearOperator op(grid, KernelParams{cfg.dim, cfg.alpha, d}, mode);
    const SampledFunction diff = commutator(b, f, g, op, 1) - exact;
    out.push_back({d, weight ? lq_norm(diff, cfg.q, *weight) : lq_norm(diff, cfg.q)});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Translation split of the truncated commutator

struct TranslationSplit {
  std::vector<std::size_t> nodes;  // x with x + t on the grid
  std::vector<double> term_i;      // (b(x) - b(x + t)) I^delta(f, g)(x)
  std::vector<double> term_ii;     // kernel-difference term
  std::vector<double> difference;  // F(x + t) - F(x), F = [b, I^delta]_1(f, g)
};

/// Evaluates both terms of F(x + t) - F(x) = I(x, t) + II(x, t) by direct
/// summation, where
/// II(x, t) = sum (b(y) - b(x + t)) f(y) g(z) (K(x + t, y, z) - K(x, y, z)).
inline TranslationSplit translation_split(const SampledFunction& b, const SampledFunction& f,
                                          const SampledFunction& g, const KernelParams& params, const Point& t) {
  const GridSpec& grid = b.grid();
  require_same_grid(b, f);
  require_same_grid(b, g);
  if (!params.delta) throw Error("translation split requires a truncated kernel");
  params.validate_on(grid);
  long k[kMaxDim] = {0, 0};
  for (int a = 0; a < grid.dim; ++a) k[a] = detail::whole_cells(t[a], grid.h);
  const auto table = detail::radial_table(grid, params);
  const auto sf = detail::support_of(f);
  const auto sg = detail::support_of(g);
  const BilinearOperator op(grid, params, ApplyMode::direct);
  const SampledFunction F = commutator(b, f, g, op, 1);
  const SampledFunction plain = op.apply(f, g);
  const double scale = grid.cell_volume() * grid.cell_volume();

  TranslationSplit s;
  for (std::size_t x = 0; x < grid.size(); ++x) {
    Index idx = grid.index(x);
    bool inside = true;
    for (int a = 0; a < grid.dim; ++a) {
      const long j = static_cast<long>(idx[a]) + k[a];
      if (j < 0 || j >= static_cast<long>(grid.M)) inside = false;
      idx[a] = static_cast<std::size_t>(j);
    }
    if (inside) s.nodes.push_back(x);
  }
  s.term_i.resize(s.nodes.size());
  s.term_ii.resize(s.nodes.size());
  s.difference.resize(s.nodes.size());
  parallel_for(s.nodes.size(), [&](std::size_t n) {
    const std::size_t x = s.nodes[n];
    Index idx = grid.index(x);
    for (int a = 0; a < grid.dim; ++a) idx[a] = static_cast<std::size_t>(static_cast<long>(idx[a]) + k[a]);
    const std::size_t xt = grid.flat(idx);
    double total = 0.0;
    for (const auto& y : sf) {
      const long dy_t = detail::lattice_distance_squared(grid, xt, y.node);
      const long dy = detail::lattice_distance_squared(grid, x, y.node);
      double inner = 0.0;
      for (const auto& z : sg) {
        const long dz_t = detail::lattice_distance_squared(grid, xt, z.node);
        const long dz = detail::lattice_distance_squared(grid, x, z.node);
        inner += (table[dy_t + dz_t] - table[dy + dz]) * z.value;
      }
      total += (b[y.node] - b[xt]) * y.value * inner;
    }
    s.term_ii[n] = total * scale;
    s.term_i[n] = (b[x] - b[xt]) * plain[x];
    s.difference[n] = F[xt] - F[x];
  });
  return s;
}

}  // namespace bifrac
