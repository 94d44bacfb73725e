#pragma once

#include <cmath>
#include <limits>
#include <string>

#include "bifrac/error.hpp"

namespace bifrac {

/// Hoelder conjugate p' = p / (p - 1).
inline double dual(double p) { return p / (p - 1.0); }

/// The exponent tuple (n, alpha, p1, p2) with the derived
/// 1/p = 1/p1 + 1/p2 and 1/q = 1/p - alpha/n.
struct ExponentConfig {
  int dim = 1;
  double alpha = 0.5;
  double p1 = 2.0;
  double p2 = 2.0;
  double p = 1.0;
  double q = 2.0;

  /// Validates every admissibility hypothesis and throws HypothesisError
  /// naming the first violated one.
  static ExponentConfig make(int dim, double alpha, double p1, double p2) {
    if (dim < 1 || dim > 2) throw HypothesisError("requires n in {1, 2}");
    const double n = dim;
    if (!(alpha > 0.0 && alpha < 2.0 * n)) throw HypothesisError("requires 0 < α < 2n");
    if (!(p1 > 1.0 && std::isfinite(p1)) || !(p2 > 1.0 && std::isfinite(p2)))
      throw HypothesisError("requires 1 < p₁, p₂ < ∞");
    const double inv_p = 1.0 / p1 + 1.0 / p2;
    if (!(alpha / n < inv_p)) throw HypothesisError("requires α/n < 1/p₁ + 1/p₂");
    ExponentConfig c;
    c.dim = dim;
    c.alpha = alpha;
    c.p1 = p1;
    c.p2 = p2;
    c.p = 1.0 / inv_p;
    c.q = 1.0 / (inv_p - alpha / n);
    if (!(c.p > 1.0)) throw HypothesisError("requires p > 1 (1/p₁ + 1/p₂ < 1)");
    if (!(c.q > 1.0 && std::isfinite(c.q))) throw HypothesisError("requires 1 < q < ∞");
    return c;
  }

  /// Exponents for constructions that only need 0 < alpha < 2n and
  /// 1 < p1, p2 < inf (witness pairs, decay slopes); p and q are derived
  /// without further checks and may fall outside (1, inf).
  static ExponentConfig relaxed(int dim, double alpha, double p1, double p2) {
    if (dim < 1 || dim > 2) throw HypothesisError("requires n in {1, 2}");
    if (!(alpha > 0.0 && alpha < 2.0 * dim)) throw HypothesisError("requires 0 < α < 2n");
    if (!(p1 > 1.0 && std::isfinite(p1)) || !(p2 > 1.0 && std::isfinite(p2)))
      throw HypothesisError("requires 1 < p₁, p₂ < ∞");
    ExponentConfig c;
    c.dim = dim;
    c.alpha = alpha;
    c.p1 = p1;
    c.p2 = p2;
    const double inv_p = 1.0 / p1 + 1.0 / p2;
    c.p = 1.0 / inv_p;
    c.q = 1.0 / (inv_p - alpha / dim);
    return c;
  }

  double p1_dual() const { return dual(p1); }
  double p2_dual() const { return dual(p2); }
  double p_dual() const { return dual(p); }

  /// 1/p1' + 1/p2', the cube-volume exponent in the witness decay bounds.
  double dual_sum() const { return 1.0 / p1_dual() + 1.0 / p2_dual(); }
};

}  // namespace bifrac
