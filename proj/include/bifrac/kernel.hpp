#pragma once

// Pointwise bilinear fractional kernel (|x-y|^2 + |x-z|^2)^-(n - alpha/2) and
// its smooth truncation at scale delta.
//
// The truncation multiplies the kernel by a cutoff in the radius
// rho = (|x-y|^2 + |x-z|^2)^(1/2): zero for rho <= sqrt(2) delta, one for
// rho >= 2 delta, and the quintic smoothstep 6s^5 - 15s^4 + 10s^3 in between.
// Since max(|x-y|, |x-z|) < delta forces rho < sqrt(2) delta and
// max(...) > 2 delta forces rho > 2 delta, the truncated kernel vanishes near
// the diagonal and agrees with the full kernel away from it.

#include <cmath>
#include <optional>

#include "bifrac/error.hpp"
#include "bifrac/grid.hpp"

namespace bifrac {

struct KernelParams {
  int dim = 1;
  double alpha = 0.5;
  std::optional<double> delta;

  /// The power n - alpha/2 applied to the squared radius.
  double exponent() const { return dim - 0.5 * alpha; }

  void validate() const {
    if (dim < 1 || dim > kMaxDim) throw Error("kernel dimension must be 1 or 2");
    if (!(alpha > 0.0 && alpha < 2.0 * dim)) throw Error("kernel requires 0 < alpha < 2n");
    if (delta && !(*delta > 0.0)) throw Error("truncation scale delta must be positive");
  }

  /// delta must be resolvable: delta >= 2h.
  void validate_on(const GridSpec& grid) const {
    validate();
    if (grid.dim != dim) throw Error("kernel dimension does not match grid");
    if (delta && *delta < 2.0 * grid.h * (1.0 - 1e-12)) throw Error("under-resolved truncation");
  }
};

inline constexpr double kSqrt2 = 1.4142135623730950488;

/// Quintic smoothstep on [0, 1], clamped outside.
inline double smoothstep5(double s) {
  if (s <= 0.0) return 0.0;
  if (s >= 1.0) return 1.0;
  return s * s * s * (s * (6.0 * s - 15.0) + 10.0);
}

/// Radial cutoff psi_delta(rho): 0 below sqrt(2) delta, 1 above 2 delta.
inline double truncation_cutoff(double rho, double delta) {
  const double lo = kSqrt2 * delta;
  const double hi = 2.0 * delta;
  if (rho <= lo) return 0.0;
  if (rho >= hi) return 1.0;
  return smoothstep5((rho - lo) / (hi - lo));
}

/// Kernel as a function of the squared radius r2 > 0. With a truncation
/// scale the value is cutoff * kernel, and r2 == 0 yields 0.
inline double kernel_from_r2(double r2, const KernelParams& params) {
  if (params.delta) {
    const double psi = truncation_cutoff(std::sqrt(r2), *params.delta);
    if (psi == 0.0) return 0.0;
    return psi * std::pow(r2, -params.exponent());
  }
  return std::pow(r2, -params.exponent());
}

namespace detail {
inline double radius_squared(const Point& x, const Point& y, const Point& z, int dim) {
  return distance_squared(x, y, dim) + distance_squared(x, z, dim);
}
}  // namespace detail

/// Untruncated kernel. Throws at the singular point (y, z) = (x, x).
inline double k_alpha(const Point& x, const Point& y, const Point& z, const KernelParams& params) {
  const double r2 = detail::radius_squared(x, y, z, params.dim);
  if (r2 == 0.0) throw Error("singular node");
  return std::pow(r2, -params.exponent());
}

/// Smoothly truncated kernel; requires params.delta.
inline double k_delta(const Point& x, const Point& y, const Point& z, const KernelParams& params) {
  if (!params.delta) throw Error("k_delta requires a truncation scale");
  const double r2 = detail::radius_squared(x, y, z, params.dim);
  if (r2 == 0.0) return 0.0;
  return kernel_from_r2(r2, params);
}

}  // namespace bifrac
