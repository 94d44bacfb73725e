#pragma once

// Discrete bilinear fractional integral
//
//   I(f, g)(x) = h^(2n) * sum_{y, z nodes} K(x - y, x - z) f(y) g(z),
//
// its commutators with pointwise multiplication, and the bilinear fractional
// maximal function over a finite cube family.
//
// Untruncated kernels drop the single singular term y = z = x. Two
// evaluation routes are provided: a direct sum over the supports of f and g,
// and an FFT route that convolves the 2n-dimensional kernel table with the
// tensor f (x) g (zero padded to >= 2M - 1 per axis, so the convolution is
// linear) and reads the diagonal u = v = x.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <memory>
#include <span>
#include <utility>
#include <vector>

#include "bifrac/error.hpp"
#include "bifrac/exponents.hpp"
#include "bifrac/fft.hpp"
#include "bifrac/grid.hpp"
#include "bifrac/kernel.hpp"
#include "bifrac/parallel.hpp"

namespace bifrac {

enum class ApplyMode { direct, fft };

inline const char* to_string(ApplyMode m) { return m == ApplyMode::direct ? "direct" : "fft"; }

namespace detail {

struct SupportEntry {
  std::size_t node;
  double value;
};

inline std::vector<SupportEntry> support_of(const SampledFunction& f) {
  std::vector<SupportEntry> s;
  for (std::size_t i = 0; i < f.size(); ++i)
    if (f[i] != 0.0) s.push_back({i, f[i]});
  return s;
}

// Operands are reordered by a content comparison before summation so that
// I(f, g) and I(g, f) run the identical floating-point sequence.
inline bool canonical_swap(const SampledFunction& f, const SampledFunction& g) {
  auto a = f.values();
  auto b = g.values();
  return std::lexicographical_compare(b.begin(), b.end(), a.begin(), a.end());
}

// Kernel values indexed by the integer squared lattice radius
// s = |i_x - i_y|^2 + |i_x - i_z|^2, so K = table[s].
inline std::vector<double> radial_table(const GridSpec& grid, const KernelParams& params) {
  const std::size_t m1 = grid.M - 1;
  const std::size_t smax = 2 * static_cast<std::size_t>(grid.dim) * m1 * m1;
  std::vector<double> t(smax + 1);
  t[0] = 0.0;
  const double h2 = grid.h * grid.h;
  for (std::size_t s = 1; s <= smax; ++s) t[s] = kernel_from_r2(h2 * static_cast<double>(s), params);
  return t;
}

inline std::size_t radial_table_bytes(const GridSpec& grid) {
  const std::size_t m1 = grid.M - 1;
  return (2 * static_cast<std::size_t>(grid.dim) * m1 * m1 + 1) * sizeof(double);
}

inline long lattice_distance_squared(const GridSpec& grid, std::size_t a, std::size_t b) {
  Index ia = grid.index(a);
  Index ib = grid.index(b);
  long s = 0;
  for (int k = 0; k < grid.dim; ++k) {
    long d = static_cast<long>(ia[k]) - static_cast<long>(ib[k]);
    s += d * d;
  }
  return s;
}

struct FftState {
  std::vector<int> shape;
  std::size_t period = 0;
  std::size_t padded_last = 0;
  fft::RealBuffer spectrum;
  std::unique_ptr<fft::InPlaceR2C> transform;

  explicit FftState(std::size_t n) : spectrum(n) {}
};

}  // namespace detail

/// Bilinear fractional integral on a fixed grid with fixed kernel
/// parameters. Immutable after construction; apply() may be called
/// concurrently.
class BilinearOperator {
 public:
  BilinearOperator(const GridSpec& grid, KernelParams params, ApplyMode mode = ApplyMode::direct,
                   std::size_t budget = default_budget_bytes())
      : grid_(grid), params_(std::move(params)), mode_(mode), budget_(budget) {
    grid_.validate(budget_);
    params_.validate_on(grid_);
    if (mode_ == ApplyMode::fft) {
      const std::size_t need = fft_bytes(grid_);
      if (need > budget_) throw BudgetError(need, budget_);
      build_fft();
    } else if (detail::radial_table_bytes(grid_) <= budget_ / 4) {
      table_ = std::make_shared<const std::vector<double>>(detail::radial_table(grid_, params_));
    }
  }

  const GridSpec& grid() const { return grid_; }
  const KernelParams& params() const { return params_; }
  ApplyMode mode() const { return mode_; }

  /// Padded FFT period per axis for a grid of extent M.
  static std::size_t fft_period(const GridSpec& grid) { return fft::good_size(2 * grid.M - 1); }

  /// Bytes held by the kernel spectrum plus one working tensor.
  static std::size_t fft_bytes(const GridSpec& grid) {
    const std::size_t p = fft_period(grid);
    std::size_t n = 1;
    for (int k = 0; k < 2 * grid.dim - 1; ++k) n *= p;
    n *= 2 * (p / 2 + 1);
    return 2 * n * sizeof(double);
  }

  SampledFunction apply(const SampledFunction& f, const SampledFunction& g) const {
    require_same_grid(f, g);
    if (!(f.grid() == grid_)) throw Error("grid mismatch");
    const bool swap = detail::canonical_swap(f, g);
    const SampledFunction& a = swap ? g : f;
    const SampledFunction& b = swap ? f : g;
    return mode_ == ApplyMode::fft ? apply_fft(a, b) : apply_direct(a, b);
  }

  SampledFunction operator()(const SampledFunction& f, const SampledFunction& g) const { return apply(f, g); }

  /// Direct sum evaluated at arbitrary points (on or off the grid); the
  /// cost is |supp f| * |supp g| per point.
  std::vector<double> apply_at(const SampledFunction& f, const SampledFunction& g,
                               std::span<const Point> points) const {
    require_same_grid(f, g);
    if (!(f.grid() == grid_)) throw Error("grid mismatch");
    const bool swap = detail::canonical_swap(f, g);
    const auto sa = detail::support_of(swap ? g : f);
    const auto sb = detail::support_of(swap ? f : g);
    std::vector<Point> ya(sa.size()), zb(sb.size());
    for (std::size_t i = 0; i < sa.size(); ++i) ya[i] = grid_.node(sa[i].node);
    for (std::size_t i = 0; i < sb.size(); ++i) zb[i] = grid_.node(sb[i].node);
    const double scale = grid_.cell_volume() * grid_.cell_volume();
    std::vector<double> out(points.size());
    parallel_for(points.size(), [&](std::size_t k) {
      const Point& x = points[k];
      std::vector<double> dz(sb.size());
      for (std::size_t j = 0; j < sb.size(); ++j) dz[j] = distance_squared(x, zb[j], grid_.dim);
      double total = 0.0;
      for (std::size_t i = 0; i < sa.size(); ++i) {
        const double dy = distance_squared(x, ya[i], grid_.dim);
        double inner = 0.0;
        for (std::size_t j = 0; j < sb.size(); ++j) {
          const double r2 = dy + dz[j];
          if (r2 == 0.0) continue;
          inner += kernel_from_r2(r2, params_) * sb[j].value;
        }
        total += sa[i].value * inner;
      }
      out[k] = total * scale;
    });
    return out;
  }

 private:
  SampledFunction apply_direct(const SampledFunction& a, const SampledFunction& b) const {
    const auto sa = detail::support_of(a);
    const auto sb = detail::support_of(b);
    const double h2 = grid_.h * grid_.h;
    const double scale = grid_.cell_volume() * grid_.cell_volume();
    std::vector<double> out(grid_.size(), 0.0);
    if (sa.empty() || sb.empty()) return SampledFunction(grid_, std::move(out));
    const std::vector<double>* table = table_.get();
    parallel_for(
        grid_.size(),
        [&](std::size_t x) {
          std::vector<long> dz(sb.size());
          for (std::size_t j = 0; j < sb.size(); ++j) dz[j] = detail::lattice_distance_squared(grid_, x, sb[j].node);
          double total = 0.0;
          for (const auto& ya : sa) {
            const long dy = detail::lattice_distance_squared(grid_, x, ya.node);
            double inner = 0.0;
            if (table) {
              for (std::size_t j = 0; j < sb.size(); ++j) inner += (*table)[dy + dz[j]] * sb[j].value;
            } else {
              for (std::size_t j = 0; j < sb.size(); ++j) {
                const long s = dy + dz[j];
                if (s == 0) continue;
                inner += kernel_from_r2(h2 * static_cast<double>(s), params_) * sb[j].value;
              }
            }
            total += ya.value * inner;
          }
          out[x] = total * scale;
        },
        16);
    return SampledFunction(grid_, std::move(out));
  }

  void build_fft() {
    const int rank = 2 * grid_.dim;
    const std::size_t p = fft_period(grid_);
    std::vector<int> shape(rank, static_cast<int>(p));
    const std::size_t total = fft::InPlaceR2C::padded_size(shape);
    auto state = std::make_shared<detail::FftState>(total);
    state->shape = shape;
    state->period = p;
    state->padded_last = fft::InPlaceR2C::padded_last(shape);
    state->transform = std::make_unique<fft::InPlaceR2C>(shape, state->spectrum);

    const std::vector<double> table = detail::radial_table(grid_, params_);
    const long m = static_cast<long>(grid_.M);
    const long per = static_cast<long>(p);
    auto displacement = [&](long i) -> long {
      if (i < m) return i;
      if (i > per - m) return i - per;
      return per;  // outside the difference window
    };
    double* data = state->spectrum.data();
    std::fill(data, data + total, 0.0);
    const std::size_t rows = total / state->padded_last;
    for (std::size_t row = 0; row < rows; ++row) {
      std::size_t rem = row;
      long s_outer = 0;
      bool valid = true;
      for (int axis = rank - 2; axis >= 0; --axis) {
        long d = displacement(static_cast<long>(rem % p));
        rem /= p;
        if (d == per) valid = false;
        s_outer += d * d;
      }
      if (!valid) continue;
      double* line = data + row * state->padded_last;
      for (long i = 0; i < per; ++i) {
        long d = displacement(i);
        if (d == per) continue;
        line[i] = table[static_cast<std::size_t>(s_outer + d * d)];
      }
    }
    state->transform->forward(state->spectrum);
    fft_ = std::move(state);
  }

  SampledFunction apply_fft(const SampledFunction& a, const SampledFunction& b) const {
    const detail::FftState& st = *fft_;
    const std::size_t total = st.spectrum.size();
    fft::RealBuffer work(total);
    double* data = work.data();
    std::fill(data, data + total, 0.0);
    const std::size_t p = st.period;
    const std::size_t n = grid_.size();
    // Row-major position of (y, z) in the padded 2n-dimensional array.
    auto offset = [&](std::size_t y, std::size_t z) {
      Index iy = grid_.index(y);
      Index iz = grid_.index(z);
      std::size_t off = 0;
      for (int k = 0; k < grid_.dim; ++k) off = off * p + iy[k];
      for (int k = 0; k < grid_.dim; ++k) {
        const bool last = k == grid_.dim - 1;
        off = off * (last ? st.padded_last : p) + iz[k];
      }
      return off;
    };
    for (std::size_t y = 0; y < n; ++y) {
      if (a[y] == 0.0) continue;
      for (std::size_t z = 0; z < n; ++z) data[offset(y, z)] = a[y] * b[z];
    }
    st.transform->forward(work);
    fftw_complex* w = work.complex();
    const fftw_complex* k = st.spectrum.complex();
    const std::size_t ncomplex = total / 2;
    for (std::size_t i = 0; i < ncomplex; ++i) {
      const double re = w[i][0] * k[i][0] - w[i][1] * k[i][1];
      const double im = w[i][0] * k[i][1] + w[i][1] * k[i][0];
      w[i][0] = re;
      w[i][1] = im;
    }
    st.transform->backward(work);
    double logical = 1.0;
    for (int r : st.shape) logical *= r;
    const double scale = grid_.cell_volume() * grid_.cell_volume() / logical;
    std::vector<double> out(n);
    for (std::size_t x = 0; x < n; ++x) out[x] = data[offset(x, x)] * scale;
    return SampledFunction(grid_, std::move(out));
  }

  GridSpec grid_;
  KernelParams params_;
  ApplyMode mode_;
  std::size_t budget_;
  std::shared_ptr<const std::vector<double>> table_;
  std::shared_ptr<const detail::FftState> fft_;
};

inline SampledFunction apply(const SampledFunction& f, const SampledFunction& g, const KernelParams& params,
                             ApplyMode mode = ApplyMode::direct) {
  return BilinearOperator(f.grid(), params, mode).apply(f, g);
}

/// [b, I]_1(f, g) = I(bf, g) - b I(f, g) for slot 1, I(f, bg) - b I(f, g)
/// for slot 2, node-wise.
inline SampledFunction commutator(const SampledFunction& b, const SampledFunction& f, const SampledFunction& g,
                                  const BilinearOperator& op, int slot = 1) {
  require_same_grid(b, f);
  require_same_grid(b, g);
  if (slot != 1 && slot != 2) throw Error("commutator slot must be 1 or 2");
  const SampledFunction plain = op.apply(f, g);
  const SampledFunction twisted = slot == 1 ? op.apply(b * f, g) : op.apply(f, b * g);
  return twisted - b * plain;
}

/// Commutator evaluated at arbitrary points through the direct route;
/// b_at holds b at those points.
inline std::vector<double> commutator_at(const SampledFunction& b, const SampledFunction& f,
                                         const SampledFunction& g, const BilinearOperator& op,
                                         std::span<const Point> points, std::span<const double> b_at) {
  if (b_at.size() != points.size()) throw Error("b_at must have one value per point");
  const auto twisted = op.apply_at(b * f, g, points);
  const auto plain = op.apply_at(f, g, points);
  std::vector<double> out(points.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = twisted[i] - b_at[i] * plain[i];
  return out;
}

/// M_alpha(f, g)(x) = max over family cubes Q containing x of
/// |Q|^(alpha/n) (mean |f| over Q) (mean |g| over Q); zero off the family.
inline SampledFunction maximal(const SampledFunction& f, const SampledFunction& g, double alpha,
                               std::span<const Cube> cubes) {
  require_same_grid(f, g);
  if (cubes.empty()) throw Error("maximal function needs a nonempty cube family");
  const GridSpec& grid = f.grid();
  std::vector<double> out(grid.size(), 0.0);
  for (const Cube& q : cubes) {
    const CubeCells c = cells_of(grid, q);
    double sf = 0.0, sg = 0.0;
    c.for_each(grid, [&](std::size_t i) {
      sf += std::abs(f[i]);
      sg += std::abs(g[i]);
    });
    const double cnt = static_cast<double>(c.count);
    const double value = std::pow(c.measure, alpha / grid.dim) * (sf / cnt) * (sg / cnt);
    c.for_each(grid, [&](std::size_t i) { out[i] = std::max(out[i], value); });
  }
  return SampledFunction(grid, std::move(out));
}

}  // namespace bifrac
