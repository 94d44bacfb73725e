#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "bifrac/bifrac.hpp"

namespace testing_support {

inline bifrac::GridSpec line(double lo, double hi, std::size_t M) {
  return bifrac::GridSpec{1, {lo, 0.0}, (hi - lo) / static_cast<double>(M), M};
}

inline bifrac::GridSpec square(double lo, double hi, std::size_t M) {
  return bifrac::GridSpec{2, {lo, lo}, (hi - lo) / static_cast<double>(M), M};
}

/// Uniform values in [lo, hi) on every node.
inline bifrac::SampledFunction uniform(const bifrac::GridSpec& g, std::mt19937_64& rng, double lo = -1.0,
                                       double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(g.size());
  for (auto& x : v) x = u(rng);
  return bifrac::SampledFunction(g, std::move(v));
}

inline double max_rel_diff(const bifrac::SampledFunction& a, const bifrac::SampledFunction& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]) / std::abs(b[i]));
  return m;
}

}  // namespace testing_support

namespace testing_support {

/// Grid-aligned cube of 2..max_nodes nodes per side at a random position.
inline bifrac::Cube random_cube(const bifrac::GridSpec& g, std::mt19937_64& rng, std::size_t max_nodes) {
  const std::size_t k = std::uniform_int_distribution<std::size_t>(2, std::min(max_nodes, g.M))(rng);
  bifrac::Cube c{{0.0, 0.0}, static_cast<double>(k) * g.h};
  for (int a = 0; a < g.dim; ++a) {
    const std::size_t lo = std::uniform_int_distribution<std::size_t>(0, g.M - k)(rng);
    c.center[a] = g.origin[a] + (static_cast<double>(lo) + 0.5 * static_cast<double>(k)) * g.h;
  }
  return c;
}

/// One of the fixture symbols with randomized parameters.
inline bifrac::SampledFunction random_symbol(const bifrac::GridSpec& g, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double side = g.box_side();
  const bifrac::Point c{g.origin[0] + side * u(rng), g.origin[1] + side * u(rng)};
  switch (std::uniform_int_distribution<int>(0, 4)(rng)) {
    case 0: return bifrac::fixtures::bump(g, c, 0.2 * side + 0.5 * side * u(rng), 0.5 + u(rng));
    case 1: return bifrac::fixtures::sine(g, 1.0 + 10.0 * u(rng), 6.0 * u(rng), 0.5 + u(rng));
    case 2: return bifrac::fixtures::log_distance(g, c);
    case 3: return bifrac::fixtures::power(g, c, -0.5 + u(rng));
    default: return uniform(g, rng);
  }
}

}  // namespace testing_support
