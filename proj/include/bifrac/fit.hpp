#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "bifrac/error.hpp"

namespace bifrac {

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};

/// Ordinary least squares y ~ slope * x + intercept.
inline LinearFit fit_line(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw Error("line fit needs at least two paired samples");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0) throw Error("line fit needs distinct abscissae");
  LinearFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.r_squared = syy == 0.0 ? 1.0 : (sxy * sxy) / (sxx * syy);
  return f;
}

/// Fit of log y against log x; every sample must be positive.
inline LinearFit fit_loglog(std::span<const double> x, std::span<const double> y) {
  std::vector<double> lx(x.size()), ly(y.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw Error("log-log fit needs positive samples");
    lx[i] = std::log(x[i]);
    ly[i] = std::log(y[i]);
  }
  return fit_line(lx, ly);
}

/// Geometric sequence of `count` values from first to last inclusive.
inline std::vector<double> geometric_range(double first, double last, std::size_t count) {
  if (count < 2) return {first};
  std::vector<double> v(count);
  const double ratio = std::pow(last / first, 1.0 / static_cast<double>(count - 1));
  for (std::size_t i = 0; i < count; ++i) v[i] = first * std::pow(ratio, static_cast<double>(i));
  v.back() = last;
  return v;
}

}  // namespace bifrac
