#pragma once

// Named sampled-function fixtures. Each kind takes numeric parameters by
// name; missing parameters fall back to the defaults listed below.
//
//   constant      value=1
//   bump          cx, cy, radius=1, amplitude=1     smooth, compactly supported
//   haar          cx, cy, side=1                    +1 / -1 halves along axis 0
//   sin           frequency=1, phase=0, amplitude=1 sin along axis 0
//   log_distance  cx, cy                            log |x - c|, r floored at h/2
//   power         cx, cy, exponent=0.5, scale=1     scale * |x - c|^a, r floored at h/2
//   indicator     cx, cy, side=1                    indicator of a cube
//   linear        cx, slope=1                       slope * (x_0 - c_x)
//   random        cx, cy, side=box, amplitude=1     iid uniform on a cube, seeded
//
// The bump, haar and sin kinds are the standard symbols of the lab: the
// bump vanishes at infinity and oscillates less on small cubes, sin keeps a
// fixed oscillation at large scales and under translation, haar carries a
// unit jump. Power and log_distance give Muckenhoupt and BMO test weights.

#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "bifrac/error.hpp"
#include "bifrac/grid.hpp"

namespace bifrac {

struct FixtureSpec {
  std::string kind;
  std::map<std::string, double> params;

  double get(const std::string& key, double fallback) const {
    auto it = params.find(key);
    return it == params.end() ? fallback : it->second;
  }
};

inline const std::vector<std::string>& fixture_kinds() {
  static const std::vector<std::string> kinds{"constant", "bump",      "haar",   "sin",   "log_distance",
                                              "power",    "indicator", "linear", "random"};
  return kinds;
}

namespace fixtures {

inline SampledFunction constant(const GridSpec& grid, double value) { return SampledFunction::constant(grid, value); }

/// amplitude * exp(1 - 1 / (1 - (r/R)^2)) inside the ball, zero outside.
inline SampledFunction bump(const GridSpec& grid, const Point& c, double radius, double amplitude = 1.0) {
  if (!(radius > 0.0)) throw Error("bump radius must be positive");
  return SampledFunction::sample(grid, [&](const Point& x) {
    const double s = distance_squared(x, c, grid.dim) / (radius * radius);
    return s < 1.0 ? amplitude * std::exp(1.0 - 1.0 / (1.0 - s)) : 0.0;
  });
}

inline SampledFunction haar(const GridSpec& grid, const Cube& q) {
  const CubeCells cells = cells_of(grid, q);
  std::vector<double> v(grid.size(), 0.0);
  cells.for_each(grid, [&](std::size_t i) { v[i] = grid.node(i)[0] < q.center[0] ? 1.0 : -1.0; });
  return SampledFunction(grid, std::move(v));
}

inline SampledFunction sine(const GridSpec& grid, double frequency, double phase = 0.0, double amplitude = 1.0) {
  return SampledFunction::sample(grid, [&](const Point& x) { return amplitude * std::sin(frequency * x[0] + phase); });
}

inline SampledFunction log_distance(const GridSpec& grid, const Point& c) {
  return SampledFunction::sample(grid, [&](const Point& x) {
    return std::log(std::max(std::sqrt(distance_squared(x, c, grid.dim)), 0.5 * grid.h));
  });
}

inline SampledFunction power(const GridSpec& grid, const Point& c, double exponent, double scale = 1.0) {
  return SampledFunction::sample(grid, [&](const Point& x) {
    return scale * std::pow(std::max(std::sqrt(distance_squared(x, c, grid.dim)), 0.5 * grid.h), exponent);
  });
}

inline SampledFunction indicator(const GridSpec& grid, const Cube& q) {
  const CubeCells cells = cells_of(grid, q);
  std::vector<double> v(grid.size(), 0.0);
  cells.for_each(grid, [&](std::size_t i) { v[i] = 1.0; });
  return SampledFunction(grid, std::move(v));
}

inline SampledFunction linear(const GridSpec& grid, double center, double slope = 1.0) {
  return SampledFunction::sample(grid, [&](const Point& x) { return slope * (x[0] - center); });
}

/// Independent uniform values in [-amplitude, amplitude] on the nodes of q.
inline SampledFunction random(const GridSpec& grid, const Cube& q, std::uint64_t seed, double amplitude = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-amplitude, amplitude);
  const CubeCells cells = cells_of(grid, q);
  std::vector<double> v(grid.size(), 0.0);
  cells.for_each(grid, [&](std::size_t i) { v[i] = u(rng); });
  return SampledFunction(grid, std::move(v));
}

}  // namespace fixtures

inline SampledFunction make_fixture(const GridSpec& grid, const FixtureSpec& spec, std::uint64_t seed = 0) {
  const Point box_center = grid.center();
  const Point c{spec.get("cx", box_center[0]), spec.get("cy", box_center[1])};
  if (spec.kind == "constant") return fixtures::constant(grid, spec.get("value", 1.0));
  if (spec.kind == "bump") return fixtures::bump(grid, c, spec.get("radius", 1.0), spec.get("amplitude", 1.0));
  if (spec.kind == "haar") return fixtures::haar(grid, Cube{c, spec.get("side", 1.0)});
  if (spec.kind == "sin")
    return fixtures::sine(grid, spec.get("frequency", 1.0), spec.get("phase", 0.0), spec.get("amplitude", 1.0));
  if (spec.kind == "log_distance") return fixtures::log_distance(grid, c);
  if (spec.kind == "power") return fixtures::power(grid, c, spec.get("exponent", 0.5), spec.get("scale", 1.0));
  if (spec.kind == "indicator") return fixtures::indicator(grid, Cube{c, spec.get("side", 1.0)});
  if (spec.kind == "linear") return fixtures::linear(grid, spec.get("cx", box_center[0]), spec.get("slope", 1.0));
  if (spec.kind == "random") {
    const auto salt = static_cast<std::uint64_t>(spec.get("stream", 0.0));
    return fixtures::random(grid, Cube{c, spec.get("side", grid.box_side())}, seed * 0x9E3779B97F4A7C15ULL + salt,
                            spec.get("amplitude", 1.0));
  }
  std::string names;
  for (const auto& k : fixture_kinds()) names += (names.empty() ? "" : ", ") + k;
  throw Error("unknown fixture kind '" + spec.kind + "' (valid: " + names + ")");
}

}  // namespace bifrac
