#pragma once

// Mean oscillation, family-supremum BMO norms, and the three vanishing
// oscillation moduli (small cubes, large cubes, far translates).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "bifrac/error.hpp"
#include "bifrac/grid.hpp"
#include "bifrac/parallel.hpp"

namespace bifrac {

/// (1/|Q|) sum_Q |b - b_Q| h^n.
inline double mean_oscillation(const SampledFunction& b, const CubeCells& cells) {
  const double avg = cube_average(b, cells);
  double s = 0.0;
  cells.for_each(b.grid(), [&](std::size_t i) { s += std::abs(b[i] - avg); });
  return s / static_cast<double>(cells.count);
}

inline double mean_oscillation(const SampledFunction& b, const Cube& q) {
  return mean_oscillation(b, cells_of(b.grid(), q));
}

struct FamilySupremum {
  double value = 0.0;
  std::size_t index = 0;  // position of the maximizing cube in the family
};

inline FamilySupremum bmo_supremum(const SampledFunction& b, std::span<const Cube> cubes) {
  if (cubes.empty()) throw Error("empty cube family");
  std::vector<double> osc(cubes.size());
  parallel_for(cubes.size(), [&](std::size_t k) { osc[k] = mean_oscillation(b, cubes[k]); });
  FamilySupremum best;
  for (std::size_t k = 0; k < osc.size(); ++k)
    if (osc[k] > best.value || k == 0) best = {osc[k], k};
  return best;
}

/// Family supremum of the mean oscillation: a lower bound for ||b||_BMO.
inline double bmo_norm(const SampledFunction& b, std::span<const Cube> cubes) {
  return bmo_supremum(b, cubes).value;
}

/// b / ||b||_BMO over the family; rechecks that the rescaled norm is 1.
inline SampledFunction normalize_bmo(const SampledFunction& b, std::span<const Cube> cubes) {
  const double norm = bmo_norm(b, cubes);
  if (!(norm > 0.0)) throw Error("zero oscillation; cannot normalize");
  SampledFunction out = (1.0 / norm) * b;
  const double check = bmo_norm(out, cubes);
  if (std::abs(check - 1.0) > 1e-12) throw Error("BMO normalization failed to reach 1");
  return out;
}

/// Supremum of the mean oscillation over every grid-aligned cube with
/// `side_nodes` nodes per side (stride one node).
inline double sliding_oscillation(const SampledFunction& b, std::size_t side_nodes) {
  const GridSpec& grid = b.grid();
  if (side_nodes < 2) throw Error("under-resolved scale");
  if (side_nodes > grid.M) throw Error("scale exceeds the grid box");
  const std::size_t per_axis = grid.M - side_nodes + 1;
  const std::size_t positions = grid.dim == 1 ? per_axis : per_axis * per_axis;
  std::vector<double> osc(positions);
  parallel_for(positions, [&](std::size_t k) {
    CubeCells c;
    const std::size_t i0 = grid.dim == 1 ? k : k / per_axis;
    const std::size_t i1 = grid.dim == 1 ? 0 : k % per_axis;
    c.lo = {i0, i1};
    c.hi = {i0 + side_nodes, grid.dim == 1 ? 1 : i1 + side_nodes};
    c.count = grid.dim == 1 ? side_nodes : side_nodes * side_nodes;
    c.measure = static_cast<double>(c.count) * grid.cell_volume();
    osc[k] = mean_oscillation(b, c);
  });
  return *std::max_element(osc.begin(), osc.end());
}

namespace detail {
inline long whole_cells(double t, double h) {
  const double k = t / h;
  const double r = std::round(k);
  if (std::abs(k - r) > 1e-9 * std::max(1.0, std::abs(k))) throw Error("shift not a multiple of h");
  return static_cast<long>(r);
}
}  // namespace detail

/// (1/|Q|) sum_{x in Q} |b(x + y) - b_Q| h^n with b_Q the average over the
/// unshifted cube. The shift must be whole grid cells and keep Q + y on
/// the grid.
inline double translation_modulus(const SampledFunction& b, const Cube& q, const Point& shift) {
  const GridSpec& grid = b.grid();
  const CubeCells c = cells_of(grid, q);
  const double avg = cube_average(b, c);
  long k[kMaxDim] = {0, 0};
  for (int a = 0; a < grid.dim; ++a) {
    k[a] = detail::whole_cells(shift[a], grid.h);
    const long lo = static_cast<long>(c.lo[a]) + k[a];
    const long hi = static_cast<long>(c.hi[a]) + k[a];
    if (lo < 0 || hi > static_cast<long>(grid.M)) throw Error("shifted cube leaves the grid box");
  }
  double s = 0.0;
  c.for_each(grid, [&](std::size_t i) {
    Index idx = grid.index(i);
    for (int a = 0; a < grid.dim; ++a) idx[a] = static_cast<std::size_t>(static_cast<long>(idx[a]) + k[a]);
    s += std::abs(b[grid.flat(idx)] - avg);
  });
  return s / static_cast<double>(c.count);
}

struct ScaleModulus {
  double volume = 0.0;   // (side_nodes * h)^n actually used
  double modulus = 0.0;
};

struct ShiftModulus {
  Point shift{0.0, 0.0};
  double distance = 0.0;  // |y|
  double modulus = 0.0;
};

struct OscillationReport {
  /// Family supremum over the dyadic-plus-shifts family of the grid box and
  /// every sliding cube used below; bounds every scale modulus.
  double bmo_norm = 0.0;
  std::vector<ScaleModulus> small_scale;
  std::vector<ScaleModulus> large_scale;
  std::vector<ShiftModulus> translation;
};

/// Scale moduli for each requested cube volume (volumes up to the reference
/// cube's volume are reported as small scales, larger ones as large scales)
/// and translation moduli of the reference cube for each shift.
inline OscillationReport cmo_moduli(const SampledFunction& b, std::span<const double> volumes,
                                    const Cube& ref_cube, std::span<const Point> shifts) {
  const GridSpec& grid = b.grid();
  OscillationReport r;
  const double ref_volume = cells_of(grid, ref_cube).measure;
  double sup = 0.0;
  for (double a : volumes) {
    if (!(a > 0.0)) throw Error("scale volume must be positive");
    const double side = std::pow(a, 1.0 / grid.dim);
    const auto nodes = static_cast<std::size_t>(std::llround(side / grid.h));
    if (nodes < 2) throw Error("under-resolved scale");
    ScaleModulus m;
    m.modulus = sliding_oscillation(b, nodes);
    m.volume = std::pow(static_cast<double>(nodes) * grid.h, grid.dim);
    sup = std::max(sup, m.modulus);
    (m.volume <= ref_volume * (1.0 + 1e-12) ? r.small_scale : r.large_scale).push_back(m);
  }
  for (const Point& y : shifts) {
    ShiftModulus m;
    m.shift = y;
    m.distance = std::sqrt(distance_squared(y, Point{0.0, 0.0}, grid.dim));
    m.modulus = translation_modulus(b, ref_cube, y);
    r.translation.push_back(m);
  }
  const auto family = dyadic_cubes(grid, 0, max_resolved_level(grid));
  r.bmo_norm = std::max(sup, bmo_norm(b, family));
  return r;
}

}  // namespace bifrac
