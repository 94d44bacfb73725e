#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "bifrac/bifrac.hpp"
#include "support.hpp"

using namespace bifrac;
using testing_support::line;
using testing_support::max_rel_diff;
using testing_support::square;

namespace {

KernelParams untruncated(int n, double alpha) { return KernelParams{n, alpha, std::nullopt}; }

// Textbook triple loop over all node pairs, skipping y = z = x.
SampledFunction brute_force(const SampledFunction& f, const SampledFunction& g, const KernelParams& k) {
  const GridSpec& grid = f.grid();
  std::vector<double> out(grid.size());
  for (std::size_t x = 0; x < grid.size(); ++x) {
    double s = 0.0;
    for (std::size_t y = 0; y < grid.size(); ++y)
      for (std::size_t z = 0; z < grid.size(); ++z) {
        if (y == x && z == x) continue;
        const Point px = grid.node(x), py = grid.node(y), pz = grid.node(z);
        s += (k.delta ? k_delta(px, py, pz, k) : k_alpha(px, py, pz, k)) * f[y] * g[z];
      }
    out[x] = s * std::pow(grid.cell_volume(), 2);
  }
  return SampledFunction(grid, std::move(out));
}

double bump_at(double x, double c, double r) {
  const double s = (x - c) * (x - c) / (r * r);
  return s < 1.0 ? std::exp(1.0 - 1.0 / (1.0 - s)) : 0.0;
}

}  // namespace

TEST(Apply, MatchesBruteForceTripleSum) {
  std::mt19937_64 rng(1);
  const GridSpec g1 = line(-1.0, 1.0, 24);
  const auto f = testing_support::uniform(g1, rng), g = testing_support::uniform(g1, rng);
  for (const KernelParams& k : {untruncated(1, 0.5), KernelParams{1, 1.2, 0.2}}) {
    const auto ref = brute_force(f, g, k);
    const auto got = apply(f, g, k);
    for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(got[i], ref[i], 1e-12 * (1.0 + std::abs(ref[i])));
  }
  const GridSpec g2 = square(0.0, 1.0, 6);
  const auto f2 = testing_support::uniform(g2, rng), h2 = testing_support::uniform(g2, rng);
  const auto ref = brute_force(f2, h2, untruncated(2, 1.0));
  const auto got = apply(f2, h2, untruncated(2, 1.0));
  for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(got[i], ref[i], 1e-12 * (1.0 + std::abs(ref[i])));
}

TEST(Apply, Bilinearity) {
  std::mt19937_64 rng(2);
  const GridSpec g = line(0.0, 1.0, 64);
  const auto f = testing_support::uniform(g, rng), h = testing_support::uniform(g, rng, 0.1, 1.0);
  for (ApplyMode mode : {ApplyMode::direct, ApplyMode::fft}) {
    const BilinearOperator op(g, untruncated(1, 0.5), mode);
    const auto base = op(f, h);
    const auto doubled = op(2.0 * f, h);
    for (std::size_t i = 0; i < g.size(); ++i) EXPECT_NEAR(doubled[i], 2.0 * base[i], 1e-12 * std::abs(base[i]));
  }
}

TEST(Apply, FftMatchesDirect) {
  std::mt19937_64 rng(3);
  for (std::size_t M : {32, 64, 128}) {
    const GridSpec g = line(-1.0, 1.0, M);
    const auto f = testing_support::uniform(g, rng, 0.0, 1.0), h = testing_support::uniform(g, rng, 0.0, 1.0);
    for (const KernelParams& k : {untruncated(1, 0.5), untruncated(1, 1.0), KernelParams{1, 0.5, 8 * g.h}}) {
      const auto d = BilinearOperator(g, k, ApplyMode::direct)(f, h);
      const auto ft = BilinearOperator(g, k, ApplyMode::fft)(f, h);
      EXPECT_LE(max_rel_diff(ft, d), 1e-10) << "M=" << M;
    }
  }
  const GridSpec g2 = square(0.0, 1.0, 12);
  const auto f = testing_support::uniform(g2, rng, 0.0, 1.0), h = testing_support::uniform(g2, rng, 0.0, 1.0);
  const auto d = BilinearOperator(g2, untruncated(2, 1.0), ApplyMode::direct)(f, h);
  const auto ft = BilinearOperator(g2, untruncated(2, 1.0), ApplyMode::fft)(f, h);
  EXPECT_LE(max_rel_diff(ft, d), 1e-10);
}

TEST(Apply, FarFieldOfUnitIndicators) {
  const GridSpec g = line(0.0, 2.0, 128);
  const auto f = fixtures::indicator(g, Cube{{0.5, 0.0}, 1.0});
  const BilinearOperator op(g, untruncated(1, 1.0));
  const std::vector<Point> x{{100.0, 0.0}};
  const double v = op.apply_at(f, f, x)[0];
  EXPECT_NEAR(v, 1.0 / std::sqrt(2.0 * 100.0 * 100.0), 0.01 * 0.0070711);
}

TEST(Apply, PositivityAndExactSymmetry) {
  std::mt19937_64 rng(4);
  for (ApplyMode mode : {ApplyMode::direct, ApplyMode::fft}) {
    const GridSpec g = line(0.0, 3.0, 96);
    const auto f = testing_support::uniform(g, rng, 0.0, 1.0), h = testing_support::uniform(g, rng, 0.0, 1.0);
    const BilinearOperator op(g, untruncated(1, 0.7), mode);
    const auto a = op(f, h), b = op(h, f);
    for (std::size_t i = 0; i < g.size(); ++i) {
      EXPECT_GE(a[i], 0.0);
      EXPECT_EQ(a[i], b[i]);
    }
  }
}

TEST(Apply, TruncationIncreasesTowardUntruncated) {
  std::mt19937_64 rng(5);
  const GridSpec g = line(0.0, 2.0, 128);
  const auto f = testing_support::uniform(g, rng, 0.0, 1.0), h = testing_support::uniform(g, rng, 0.0, 1.0);
  const auto full = apply(f, h, untruncated(1, 0.5));
  SampledFunction previous = SampledFunction::constant(g, 0.0);
  for (double delta = 0.5; delta >= 2 * g.h; delta /= 2) {
    const auto cur = apply(f, h, KernelParams{1, 0.5, delta});
    for (std::size_t i = 0; i < g.size(); ++i) {
      EXPECT_GE(cur[i], previous[i]);
      EXPECT_LE(cur[i], full[i] * (1 + 1e-14));
    }
    previous = cur;
  }
}

TEST(Apply, GridMismatchAndBudget) {
  const GridSpec a = line(0.0, 1.0, 16), b = line(0.0, 1.0, 17);
  EXPECT_THROW(apply(SampledFunction::constant(a, 1.0), SampledFunction::constant(b, 1.0), untruncated(1, 0.5)),
               Error);
  const GridSpec big = square(0.0, 1.0, 64);
  const std::size_t need = BilinearOperator::fft_bytes(big);
  try {
    BilinearOperator(big, untruncated(2, 1.0), ApplyMode::fft, need - 1);
    FAIL();
  } catch (const BudgetError& e) {
    EXPECT_EQ(e.required(), need);
    EXPECT_EQ(e.budget(), need - 1);
  }
}

TEST(Commutator, ConstantSymbolVanishes) {
  std::mt19937_64 rng(6);
  const GridSpec g = line(0.0, 2.0, 64);
  const auto f = testing_support::uniform(g, rng), h = testing_support::uniform(g, rng);
  const BilinearOperator op(g, untruncated(1, 0.5));
  for (int slot : {1, 2}) {
    const auto c = commutator(SampledFunction::constant(g, 2.5), f, h, op, slot);
    for (std::size_t i = 0; i < g.size(); ++i) EXPECT_NEAR(c[i], 0.0, 1e-12);
  }
}

TEST(Commutator, SlotSymmetryIsExact) {
  std::mt19937_64 rng(7);
  const GridSpec g = line(0.0, 2.0, 64);
  const auto b = testing_support::uniform(g, rng), f = testing_support::uniform(g, rng),
             h = testing_support::uniform(g, rng);
  for (ApplyMode mode : {ApplyMode::direct, ApplyMode::fft}) {
    const BilinearOperator op(g, untruncated(1, 0.5), mode);
    const auto two = commutator(b, f, h, op, 2);
    const auto one = commutator(b, h, f, op, 1);
    for (std::size_t i = 0; i < g.size(); ++i) EXPECT_EQ(two[i], one[i]);
  }
}

TEST(Commutator, BumpSymbolPinnedValues) {
  // Values at M = 256 agree with M = 1024 to four digits.
  const GridSpec g = line(-2.0, 2.0, 256);
  const auto b = fixtures::bump(g, {0.3, 0.0}, 1.0);
  const auto f = fixtures::indicator(g, Cube{{0.5, 0.0}, 1.0});
  const BilinearOperator op(g, untruncated(1, 1.0));
  const std::vector<Point> pts{{-1.0, 0.0}, {0.5, 0.0}, {1.5, 0.0}};
  std::vector<double> b_at;
  for (const Point& p : pts) b_at.push_back(bump_at(p[0], 0.3, 1.0));
  const auto c = commutator_at(b, f, f, op, pts, b_at);
  EXPECT_NEAR(c[0], 0.415023817167, 1e-9);
  EXPECT_NEAR(c[1], -0.22981547244, 1e-9);
  EXPECT_NEAR(c[2], 0.605759314158, 1e-9);
  EXPECT_NEAR(c[0], 0.415014102454, 1e-4);
  EXPECT_NEAR(c[1], -0.229840006565, 1e-4);
  EXPECT_NEAR(c[2], 0.605738334597, 1e-4);
  const auto grid_values = commutator(b, f, f, op);
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_TRUE(std::isfinite(grid_values[i]));
  EXPECT_GT(grid_values.max_abs(), 0.1);
}

TEST(Commutator, RejectsBadSlot) {
  const GridSpec g = line(0.0, 1.0, 8);
  const auto one = SampledFunction::constant(g, 1.0);
  EXPECT_THROW(commutator(one, one, one, BilinearOperator(g, untruncated(1, 0.5)), 3), Error);
}

TEST(Maximal, IndicatorAtItsOwnCube) {
  const GridSpec g = line(0.0, 1.0, 64);
  const Cube q{{0.25, 0.0}, 0.5};
  const auto f = fixtures::indicator(g, q);
  const auto cubes = dyadic_cubes(g, 0, 3);
  const auto m = maximal(f, f, 0.5, cubes);
  const std::size_t centre = 16;
  EXPECT_GE(m[centre], std::pow(0.5, 0.5) * (1 - 1e-15));
}

TEST(Maximal, ConstantOnesGiveLargestContainingVolume) {
  const GridSpec g = square(0.0, 1.0, 16);
  const auto one = SampledFunction::constant(g, 1.0);
  const auto m = maximal(one, one, 1.0, dyadic_cubes(g, 0, 2));
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_NEAR(m[i], 1.0, 1e-15);
}

TEST(Maximal, MatchesBruteForceOverExplicitList) {
  std::mt19937_64 rng(8);
  const GridSpec g = square(0.0, 1.0, 16);
  const auto f = testing_support::uniform(g, rng, 0.0, 1.0), h = testing_support::uniform(g, rng, 0.0, 1.0);
  const auto cubes = dyadic_cubes(g, 0, 3);
  const double alpha = 0.8;
  const auto m = maximal(f, h, alpha, cubes);
  for (std::size_t x = 0; x < g.size(); ++x) {
    const Point px = g.node(x);
    double best = 0.0;
    for (const Cube& q : cubes) {
      auto inside = [&](const Point& p) {
        for (int a = 0; a < 2; ++a)
          if (p[a] < q.center[a] - q.side / 2 || p[a] >= q.center[a] + q.side / 2) return false;
        return true;
      };
      if (!inside(px)) continue;
      double sf = 0.0, sh = 0.0, count = 0.0;
      for (std::size_t y = 0; y < g.size(); ++y)
        if (inside(g.node(y))) {
          sf += f[y];
          sh += h[y];
          count += 1.0;
        }
      best = std::max(best, std::pow(q.side * q.side, alpha / 2.0) * (sf / count) * (sh / count));
    }
    EXPECT_NEAR(m[x], best, 1e-13 * best);
  }
}

TEST(Maximal, EmptyFamilyIsAnError) {
  const GridSpec g = line(0.0, 1.0, 8);
  const auto one = SampledFunction::constant(g, 1.0);
  EXPECT_THROW(maximal(one, one, 0.5, std::vector<Cube>{}), Error);
}

TEST(TranslationSplit, TermsAddUpAndSecondTermIsDominated) {
  const GridSpec g = line(-4.0, 4.0, 256);
  const auto b = fixtures::bump(g, {0.3, 0.0}, 1.0);
  const auto f = fixtures::indicator(g, Cube{{-0.25, 0.0}, 1.5});
  const auto h = fixtures::bump(g, {0.5, 0.0}, 1.2);
  const double delta = 8 * g.h, t = g.h;
  const KernelParams k{1, 0.5, delta};
  const TranslationSplit s = translation_split(b, f, h, k, Point{t, 0.0});
  const auto m = maximal(f, h, 0.5, dyadic_cubes(g, 0, max_resolved_level(g)));
  double scale = 0.0;
  for (double d : s.difference) scale = std::max(scale, std::abs(d));
  const double frozen = 1.35;
  double fitted = 0.0;
  for (std::size_t n = 0; n < s.nodes.size(); ++n) {
    EXPECT_NEAR(s.term_i[n] + s.term_ii[n], s.difference[n], 1e-10 * scale);
    const double mx = m[s.nodes[n]];
    if (mx > 0.0) fitted = std::max(fitted, std::abs(s.term_ii[n]) / (b.max_abs() * (t / delta) * mx));
    else EXPECT_NEAR(s.term_ii[n], 0.0, 1e-14);
  }
  EXPECT_LE(fitted, frozen);
  EXPECT_GT(fitted, 0.5 * frozen);
}
