#pragma once

// Uniform cell-centred grids on boxes in R^n (n = 1, 2), sampled functions,
// axis-parallel cubes, midpoint quadrature and weighted Lebesgue norms.
//
// Node i on an axis sits at origin + (i + 1/2) h and owns the cell
// [origin + i h, origin + (i + 1) h). A cube [c - d/2, c + d/2)^n contains a
// node when the node lies in the half-open box, so dyadic subcubes of the
// grid box partition the nodes exactly.

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <istream>
#include <limits>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "bifrac/error.hpp"
#include "bifrac/parallel.hpp"

namespace bifrac {

inline constexpr int kMaxDim = 2;
using Point = std::array<double, kMaxDim>;
using Index = std::array<std::size_t, kMaxDim>;

struct GridSpec {
  int dim = 1;
  Point origin{0.0, 0.0};
  double h = 1.0;
  std::size_t M = 2;

  std::size_t size() const { return dim == 1 ? M : M * M; }
  double box_side() const { return static_cast<double>(M) * h; }
  double cell_volume() const { return dim == 1 ? h : h * h; }
  double box_volume() const { return dim == 1 ? box_side() : box_side() * box_side(); }

  double coord(int axis, std::size_t i) const {
    return origin[axis] + (static_cast<double>(i) + 0.5) * h;
  }

  Index index(std::size_t flat) const {
    if (dim == 1) return {flat, 0};
    return {flat / M, flat % M};
  }

  std::size_t flat(const Index& idx) const { return dim == 1 ? idx[0] : idx[0] * M + idx[1]; }

  Point node(std::size_t flat_index) const {
    Index idx = index(flat_index);
    Point p{0.0, 0.0};
    for (int a = 0; a < dim; ++a) p[a] = coord(a, idx[a]);
    return p;
  }

  Point center() const {
    Point c{0.0, 0.0};
    for (int a = 0; a < dim; ++a) c[a] = origin[a] + 0.5 * box_side();
    return c;
  }

  void validate(std::size_t budget = default_budget_bytes()) const {
    if (dim < 1 || dim > kMaxDim) throw Error("grid dimension must be 1 or 2");
    if (!(h > 0.0) || !std::isfinite(h)) throw Error("grid spacing h must be positive");
    if (M < 2) throw Error("grid extent M must be at least 2");
    for (int a = 0; a < dim; ++a)
      if (!std::isfinite(origin[a])) throw Error("grid origin must be finite");
    const double nodes = std::pow(static_cast<double>(M), dim);
    if (nodes * sizeof(double) > static_cast<double>(budget))
      throw BudgetError(static_cast<std::size_t>(nodes * sizeof(double)), budget);
  }

  bool operator==(const GridSpec& o) const {
    if (dim != o.dim || h != o.h || M != o.M) return false;
    for (int a = 0; a < dim; ++a)
      if (origin[a] != o.origin[a]) return false;
    return true;
  }
};

/// Squared Euclidean distance using the first `dim` coordinates.
inline double distance_squared(const Point& a, const Point& b, int dim) {
  double s = 0.0;
  for (int k = 0; k < dim; ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
  return s;
}

/// Real values on every node of a grid, row-major (axis 0 slowest).
class SampledFunction {
 public:
  SampledFunction(GridSpec grid, std::vector<double> values)
      : grid_(std::move(grid)), values_(std::move(values)) {
    grid_.validate();
    if (values_.size() != grid_.size())
      throw Error("sampled function has " + std::to_string(values_.size()) +
                  " values, grid has " + std::to_string(grid_.size()) + " nodes");
    for (double v : values_)
      if (!std::isfinite(v)) throw Error("sampled function contains a non-finite value");
  }

  static SampledFunction constant(const GridSpec& grid, double c) {
    return SampledFunction(grid, std::vector<double>(grid.size(), c));
  }

  template <typename Fn>
  static SampledFunction sample(const GridSpec& grid, Fn&& fn) {
    std::vector<double> v(grid.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = fn(grid.node(i));
    return SampledFunction(grid, std::move(v));
  }

  const GridSpec& grid() const { return grid_; }
  std::span<const double> values() const { return values_; }
  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }

  double max_abs() const {
    double m = 0.0;
    for (double v : values_) m = std::max(m, std::abs(v));
    return m;
  }

  double min() const { return *std::min_element(values_.begin(), values_.end()); }

 private:
  GridSpec grid_;
  std::vector<double> values_;
};

inline void require_same_grid(const SampledFunction& a, const SampledFunction& b) {
  if (!(a.grid() == b.grid())) throw Error("grid mismatch");
}

template <typename Fn>
SampledFunction map(const SampledFunction& a, Fn&& fn) {
  std::vector<double> v(a.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = fn(a[i]);
  return SampledFunction(a.grid(), std::move(v));
}

template <typename Fn>
SampledFunction zip(const SampledFunction& a, const SampledFunction& b, Fn&& fn) {
  require_same_grid(a, b);
  std::vector<double> v(a.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = fn(a[i], b[i]);
  return SampledFunction(a.grid(), std::move(v));
}

inline SampledFunction operator*(const SampledFunction& a, const SampledFunction& b) {
  return zip(a, b, [](double x, double y) { return x * y; });
}
inline SampledFunction operator-(const SampledFunction& a, const SampledFunction& b) {
  return zip(a, b, [](double x, double y) { return x - y; });
}
inline SampledFunction operator+(const SampledFunction& a, const SampledFunction& b) {
  return zip(a, b, [](double x, double y) { return x + y; });
}
inline SampledFunction operator*(double s, const SampledFunction& a) {
  return map(a, [s](double x) { return s * x; });
}
inline SampledFunction operator+(const SampledFunction& a, double c) {
  return map(a, [c](double x) { return x + c; });
}

/// Axis-parallel cube [center - side/2, center + side/2)^n.
struct Cube {
  Point center{0.0, 0.0};
  double side = 1.0;

  double volume(int dim) const { return dim == 1 ? side : side * side; }
  Point lower(int dim) const {
    Point p{0.0, 0.0};
    for (int a = 0; a < dim; ++a) p[a] = center[a] - 0.5 * side;
    return p;
  }
};

/// Node index box of a cube clipped to the grid: nodes lo[a] <= i < hi[a].
struct CubeCells {
  Index lo{0, 0};
  Index hi{1, 1};
  std::size_t count = 0;
  /// Discrete measure count * h^n; every cube average divides by it.
  double measure = 0.0;

  template <typename Fn>
  void for_each(const GridSpec& grid, Fn&& fn) const {
    if (grid.dim == 1) {
      for (std::size_t i = lo[0]; i < hi[0]; ++i) fn(i);
    } else {
      for (std::size_t i = lo[0]; i < hi[0]; ++i)
        for (std::size_t j = lo[1]; j < hi[1]; ++j) fn(i * grid.M + j);
    }
  }

  bool contains(const GridSpec& grid, std::size_t flat) const {
    Index idx = grid.index(flat);
    for (int a = 0; a < grid.dim; ++a)
      if (idx[a] < lo[a] || idx[a] >= hi[a]) return false;
    return true;
  }
};

namespace detail {
inline double snap(double t) {
  double r = std::round(t);
  return std::abs(t - r) < 1e-9 ? r : t;
}
}  // namespace detail

/// Nodes of `grid` inside the half-open cube. Throws "cube off grid" when
/// the intersection has no node.
inline CubeCells cells_of(const GridSpec& grid, const Cube& q) {
  if (!(q.side > 0.0)) throw Error("cube side must be positive");
  CubeCells c;
  c.count = 1;
  for (int a = 0; a < grid.dim; ++a) {
    const double lo = q.center[a] - 0.5 * q.side;
    const double hi = q.center[a] + 0.5 * q.side;
    const double ta = detail::snap((lo - grid.origin[a]) / grid.h - 0.5);
    const double tb = detail::snap((hi - grid.origin[a]) / grid.h - 0.5);
    const double m = static_cast<double>(grid.M);
    const double ia = std::clamp(std::ceil(ta), 0.0, m);
    const double ib = std::clamp(std::ceil(tb), 0.0, m);
    if (ib <= ia) throw Error("cube off grid");
    c.lo[a] = static_cast<std::size_t>(ia);
    c.hi[a] = static_cast<std::size_t>(ib);
    c.count *= c.hi[a] - c.lo[a];
  }
  c.measure = static_cast<double>(c.count) * grid.cell_volume();
  return c;
}

/// Quadrature mean of b over the nodes of Q.
inline double cube_average(const SampledFunction& b, const CubeCells& cells) {
  double s = 0.0;
  cells.for_each(b.grid(), [&](std::size_t i) { s += b[i]; });
  return s / static_cast<double>(cells.count);
}

inline double cube_average(const SampledFunction& b, const Cube& q) {
  return cube_average(b, cells_of(b.grid(), q));
}

namespace detail {
inline void check_weight(const SampledFunction& f, const SampledFunction& w) {
  require_same_grid(f, w);
  for (double v : w.values())
    if (!(v > 0.0)) throw Error("weight must be positive on every node");
}

template <typename Pred>
double lq_norm_impl(const SampledFunction& f, double q, const SampledFunction* w, Pred&& keep) {
  if (!(q >= 1.0) || !std::isfinite(q)) throw Error("Lebesgue exponent must satisfy 1 <= q < inf");
  if (w) check_weight(f, *w);
  double scale = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i)
    if (keep(i)) scale = std::max(scale, std::abs(f[i]));
  if (scale == 0.0) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (!keep(i)) continue;
    double t = std::pow(std::abs(f[i]) / scale, q);
    s += w ? t * (*w)[i] : t;
  }
  return scale * std::pow(s * f.grid().cell_volume(), 1.0 / q);
}
}  // namespace detail

/// (sum |f|^q w h^n)^(1/q); the weight defaults to 1.
inline double lq_norm(const SampledFunction& f, double q) {
  return detail::lq_norm_impl(f, q, nullptr, [](std::size_t) { return true; });
}

inline double lq_norm(const SampledFunction& f, double q, const SampledFunction& w) {
  return detail::lq_norm_impl(f, q, &w, [](std::size_t) { return true; });
}

/// Norm restricted to the nodes selected by mask (mask[i] != 0).
inline double lq_norm_masked(const SampledFunction& f, double q, std::span<const char> mask,
                             const SampledFunction* w = nullptr) {
  if (mask.size() != f.size()) throw Error("mask size does not match grid");
  return detail::lq_norm_impl(f, q, w, [&](std::size_t i) { return mask[i] != 0; });
}

inline double lq_norm_on(const SampledFunction& f, double q, const Cube& q_cube,
                         const SampledFunction* w = nullptr) {
  CubeCells c = cells_of(f.grid(), q_cube);
  return detail::lq_norm_impl(f, q, w, [&](std::size_t i) { return c.contains(f.grid(), i); });
}

/// Dyadic subcubes of the grid box at levels [min_level, max_level] together
/// with their half-shifted translates. At level L the side is
/// box_side * 2^-L and lower corners run over multiples of side/2 on each
/// axis, keeping only cubes inside the box; that gives (2^(L+1) - 1)^n cubes
/// per level, 2^(nL) of them dyadic.
inline std::vector<Cube> dyadic_cubes(const GridSpec& grid, int min_level, int max_level) {
  if (min_level < 0 || min_level > max_level) throw Error("invalid dyadic level range");
  std::vector<Cube> out;
  for (int level = min_level; level <= max_level; ++level) {
    const double side = grid.box_side() / std::ldexp(1.0, level);
    if (side < 2.0 * grid.h * (1.0 - 1e-12)) throw Error("cube under-resolved");
    const std::size_t positions = (std::size_t{2} << level) - 1;
    const std::size_t total = grid.dim == 1 ? positions : positions * positions;
    for (std::size_t k = 0; k < total; ++k) {
      const std::size_t i0 = grid.dim == 1 ? k : k / positions;
      const std::size_t i1 = grid.dim == 1 ? 0 : k % positions;
      Cube c;
      c.side = side;
      c.center[0] = grid.origin[0] + (static_cast<double>(i0) + 1.0) * 0.5 * side;
      if (grid.dim == 2) c.center[1] = grid.origin[1] + (static_cast<double>(i1) + 1.0) * 0.5 * side;
      out.push_back(c);
    }
  }
  return out;
}

/// Deepest level whose cubes still have side >= 2h.
inline int max_resolved_level(const GridSpec& grid) {
  int level = 0;
  while (grid.box_side() / std::ldexp(1.0, level + 1) >= 2.0 * grid.h * (1.0 - 1e-12)) ++level;
  return level;
}

inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

/// CSV: a header line "# dim,origin...,h,M" followed by one value per line
/// in node order, shortest round-trip decimal formatting.
inline void write_csv(std::ostream& os, const SampledFunction& f) {
  const GridSpec& g = f.grid();
  os << "# " << g.dim;
  for (int a = 0; a < g.dim; ++a) os << ',' << format_double(g.origin[a]);
  os << ',' << format_double(g.h) << ',' << g.M << '\n';
  for (double v : f.values()) os << format_double(v) << '\n';
}

namespace detail {
inline double parse_double(const std::string& s) {
  double v = 0.0;
  auto first = s.data();
  auto last = s.data() + s.size();
  while (first < last && (*first == ' ' || *first == '\t')) ++first;
  while (last > first && (last[-1] == ' ' || last[-1] == '\r' || last[-1] == '\t')) --last;
  auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc() || res.ptr != last) throw Error("malformed number in CSV: '" + s + "'");
  return v;
}
}  // namespace detail

inline SampledFunction read_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line.rfind("# ", 0) != 0) throw Error("missing CSV grid header");
  std::vector<std::string> fields;
  {
    std::stringstream ss(line.substr(2));
    std::string item;
    while (std::getline(ss, item, ',')) fields.push_back(item);
  }
  if (fields.empty()) throw Error("empty CSV grid header");
  GridSpec g;
  g.dim = static_cast<int>(detail::parse_double(fields[0]));
  if (g.dim < 1 || g.dim > kMaxDim || fields.size() != static_cast<std::size_t>(g.dim) + 3)
    throw Error("malformed CSV grid header");
  for (int a = 0; a < g.dim; ++a) g.origin[a] = detail::parse_double(fields[1 + a]);
  g.h = detail::parse_double(fields[1 + g.dim]);
  g.M = static_cast<std::size_t>(detail::parse_double(fields[2 + g.dim]));
  std::vector<double> values;
  values.reserve(g.size());
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    values.push_back(detail::parse_double(line));
  }
  return SampledFunction(g, std::move(values));
}

}  // namespace bifrac
