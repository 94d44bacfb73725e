#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "bifrac/bifrac.hpp"
#include "support.hpp"

using namespace bifrac;
using testing_support::line;
using testing_support::square;

namespace {

// Mean of w^e over the nodes of q, found by scanning every node coordinate.
double brute_mean(const SampledFunction& w, double e, const Cube& q) {
  const GridSpec& g = w.grid();
  double s = 0.0, n = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const Point x = g.node(i);
    bool in = true;
    for (int a = 0; a < g.dim; ++a)
      if (x[a] < q.center[a] - q.side / 2 || x[a] >= q.center[a] + q.side / 2) in = false;
    if (!in) continue;
    s += std::pow(w[i], e);
    n += 1.0;
  }
  return s / n;
}

double brute_ap(const SampledFunction& w, double p, const std::vector<Cube>& cubes) {
  const double pd = p / (p - 1.0);
  double best = 0.0;
  for (const Cube& q : cubes) best = std::max(best, brute_mean(w, 1.0, q) * std::pow(brute_mean(w, 1.0 - pd, q), p / pd));
  return best;
}

double brute_apq(const SampledFunction& w, double p, double q, const std::vector<Cube>& cubes) {
  const double pd = p / (p - 1.0);
  double best = 0.0;
  for (const Cube& c : cubes) best = std::max(best, brute_mean(w, q, c) * std::pow(brute_mean(w, -pd, c), q / pd));
  return best;
}

double brute_vector_apq(const WeightPair& pair, const std::vector<Cube>& cubes) {
  const auto& c = pair.cfg;
  const double d1 = c.p1 / (c.p1 - 1), d2 = c.p2 / (c.p2 - 1);
  const auto mu = pair.mu();
  double best = 0.0;
  for (const Cube& q : cubes)
    best = std::max(best, brute_mean(mu, 1.0, q) * std::pow(brute_mean(pair.w1, -d1, q), c.q / d1) *
                              std::pow(brute_mean(pair.w2, -d2, q), c.q / d2));
  return best;
}

struct Fixture {
  GridSpec grid = line(-1.0, 1.0, 128);
  std::vector<Cube> cubes = dyadic_cubes(grid, 0, 5);
  ExponentConfig cfg = ExponentConfig::make(1, 0.25, 3.0, 3.0);
  SampledFunction pw(double a) const { return fixtures::power(grid, {0.0, 0.0}, a); }
};

}  // namespace

TEST(ApConstant, ConstantWeightsGiveOne) {
  Fixture fx;
  for (double p : {1.5, 2.0, 4.0}) {
    EXPECT_EQ(ap_constant(SampledFunction::constant(fx.grid, 1.0), p, fx.cubes), 1.0);
    EXPECT_NEAR(ap_constant(SampledFunction::constant(fx.grid, 7.5), p, fx.cubes), 1.0, 1e-14);
  }
}

TEST(ApConstant, SquareRootWeightMatchesBruteForce) {
  Fixture fx;
  const auto w = fx.pw(0.5);
  const double v = ap_constant(w, 2.0, fx.cubes);
  EXPECT_NEAR(v, brute_ap(w, 2.0, fx.cubes), 1e-9 * v);
  EXPECT_TRUE(std::isfinite(v));
  // Refinement toward the analytic value on the root cube family.
  const GridSpec fine = line(-1.0, 1.0, 512);
  const double vf = ap_constant(fixtures::power(fine, {0.0, 0.0}, 0.5), 2.0, dyadic_cubes(fine, 0, 5));
  EXPECT_GE(vf, v - 1e-12);
}

TEST(ApConstant, JensenLowerBoundAndMonotoneInP) {
  Fixture fx;
  for (double a : {-0.4, -0.1, 0.3, 0.8}) {
    const auto w = fx.pw(a);
    double prev = std::numeric_limits<double>::infinity();
    for (double p : {1.5, 2.0, 3.0, 5.0}) {
      const double v = ap_constant(w, p, fx.cubes);
      EXPECT_GE(v, 1.0 - 1e-9);
      EXPECT_LE(v, prev * (1 + 1e-12));
      prev = v;
    }
  }
}

TEST(ApConstant, RejectsBadInput) {
  Fixture fx;
  EXPECT_THROW(ap_constant(fx.pw(0.5), 1.0, fx.cubes), Error);
  EXPECT_THROW(ap_constant(SampledFunction::constant(fx.grid, 0.0), 2.0, fx.cubes), Error);
}

TEST(ApqConstant, OneForUnitWeight) {
  Fixture fx;
  EXPECT_EQ(apq_constant(SampledFunction::constant(fx.grid, 1.0), 2.0, 4.0, fx.cubes), 1.0);
}

TEST(ApqConstant, IdentityWithLiftedAp) {
  Fixture fx;
  for (double a : {-0.3, 0.1, 0.4})
    for (auto [p, q] : {std::pair{2.0, 4.0}, std::pair{1.5, 2.4}, std::pair{3.0, 3.0}}) {
      const ApqResult r = apq_check(fx.pw(a), p, q, fx.cubes);
      EXPECT_LE(r.identity_gap, 1e-10) << a << ' ' << p << ' ' << q;
    }
}

TEST(ApqConstant, PowerWeightPinnedByBruteForce) {
  Fixture fx;
  const auto w = fx.pw(0.1);
  const double v = apq_constant(w, 2.0, 4.0, fx.cubes);
  EXPECT_TRUE(std::isfinite(v));
  EXPECT_NEAR(v, brute_apq(w, 2.0, 4.0, fx.cubes), 1e-9 * v);
  EXPECT_THROW(apq_constant(w, 2.0, 1.5, fx.cubes), Error);
}

TEST(VectorConstants, UnitPairGivesOne) {
  Fixture fx;
  const WeightPair pair(SampledFunction::constant(fx.grid, 1.0), SampledFunction::constant(fx.grid, 1.0), fx.cfg);
  EXPECT_EQ(vector_ap_constant(pair, fx.cubes), 1.0);
  EXPECT_EQ(vector_apq_constant(pair, fx.cubes), 1.0);
}

TEST(VectorConstants, ProductOfApWeightsIsFinite) {
  Fixture fx;
  const WeightPair pair(fx.pw(0.5), fx.pw(-0.3), fx.cfg);
  EXPECT_TRUE(std::isfinite(ap_constant(pair.w1, fx.cfg.p1, fx.cubes)));
  EXPECT_TRUE(std::isfinite(ap_constant(pair.w2, fx.cfg.p2, fx.cubes)));
  const double v = vector_ap_constant(pair, fx.cubes);
  EXPECT_TRUE(std::isfinite(v));
  EXPECT_GE(v, 1.0 - 1e-9);
}

TEST(VectorConstants, ApqMatchesBruteForceAndIgnoresScaling) {
  Fixture fx;
  const WeightPair pair(fx.pw(0.05), fx.pw(-0.1), fx.cfg);
  const double v = vector_apq_constant(pair, fx.cubes);
  EXPECT_NEAR(v, brute_vector_apq(pair, fx.cubes), 1e-9 * v);
  const WeightPair scaled(3.7 * pair.w1, pair.w2, fx.cfg);
  EXPECT_NEAR(vector_apq_constant(scaled, fx.cubes), v, 1e-12 * v);
}

TEST(WeightPair, RejectsNonPositiveWeights) {
  Fixture fx;
  EXPECT_THROW(WeightPair(SampledFunction::constant(fx.grid, 0.0), fx.pw(0.1), fx.cfg), Error);
  EXPECT_THROW(WeightPair(fx.pw(0.1), SampledFunction::constant(line(0.0, 1.0, 4), 1.0), fx.cfg), Error);
}

TEST(Lemma1, UnitWeightsHoldWithEquality) {
  Fixture fx;
  const WeightPair pair(SampledFunction::constant(fx.grid, 1.0), SampledFunction::constant(fx.grid, 1.0), fx.cfg);
  const Lemma1Report r = lemma1_check(pair, fx.cubes);
  EXPECT_TRUE(r.hypothesis_satisfied);
  EXPECT_EQ(r.status, "verified");
  EXPECT_EQ(r.apq_of_w.value, 1.0);
  EXPECT_EQ(r.ap_of_lifted.value, 1.0);
  EXPECT_EQ(r.mu_ap.value, 1.0);
  EXPECT_EQ(r.mu_ap_bound, 1.0);
  EXPECT_EQ(r.chain_min_slack, 0.0);
}

TEST(Lemma1, PowerWeightPairsHoldCubeWise) {
  Fixture fx;
  const std::pair<double, double> exps[] = {{0.05, -0.1}, {0.08, 0.08}, {-0.15, 0.02}, {-0.05, -0.18}, {0.1, -0.2}};
  for (const auto& [a1, a2] : exps) {
    const WeightPair pair(fx.pw(a1), fx.pw(a2), fx.cfg);
    const Lemma1Report r = lemma1_check(pair, fx.cubes);
    ASSERT_TRUE(r.hypothesis_satisfied) << a1 << ' ' << a2;
    EXPECT_GE(r.chain_min_slack, -1e-9);
    EXPECT_GE(r.cubewise_min_slack, -1e-9);
    EXPECT_GE(r.constant_slack, -1e-9);
    EXPECT_TRUE(r.mu_aq_holds);
    EXPECT_EQ(r.status, "verified");
    EXPECT_TRUE(std::isfinite(r.dual_weight1_a2p));
    EXPECT_TRUE(std::isfinite(r.mu_a2q));
  }
}

TEST(Lemma1, SteepWeightFailsTheHypothesis) {
  Fixture fx;
  const WeightPair pair(fx.pw(1.0), fx.pw(0.05), fx.cfg);
  const Lemma1Report r = lemma1_check(pair, fx.cubes);
  EXPECT_FALSE(r.hypothesis_satisfied);
  EXPECT_EQ(r.status, "hypothesis not satisfied");
  EXPECT_GT(r.hypothesis1.value, 1e6);
}

TEST(Lemma1, TwoDimensionalPair) {
  const GridSpec g = square(-1.0, 1.0, 32);
  const auto cubes = dyadic_cubes(g, 0, 3);
  const ExponentConfig cfg = ExponentConfig::make(2, 0.5, 3.0, 3.0);
  const WeightPair pair(fixtures::power(g, {0.0, 0.0}, 0.05), fixtures::power(g, {0.0, 0.0}, -0.1), cfg);
  const Lemma1Report r = lemma1_check(pair, cubes);
  ASSERT_TRUE(r.hypothesis_satisfied);
  EXPECT_EQ(r.status, "verified");
}

TEST(WeightReport, ScalarConstantsRespectJensen) {
  Fixture fx;
  const WeightPair pair(fx.pw(0.05), fx.pw(-0.1), fx.cfg);
  const WeightReport r = weight_report(pair, fx.cubes);
  for (const auto& [tag, rec] : r.ap_constants) EXPECT_GE(rec.value, 1.0 - 1e-9) << tag;
  EXPECT_EQ(r.ap_constants.size(), 8u);
}
