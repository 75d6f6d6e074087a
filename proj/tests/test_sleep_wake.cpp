#include <gtest/gtest.h>

#include <cmath>

#include "ehcap/sleep_wake.hpp"
#include "oracles.hpp"

using namespace ehcap;

namespace {

// I(X; W) for X = 0 w.p. p else N(0, beta), brute-force trapezoid, bits.
double gaussWakeOracle(double p, double beta) {
  double h = 0.0;
  const double dw = 1e-3, lim = 12.0 * std::sqrt(1.0 + beta);
  for (double w = -lim; w <= lim; w += dw) {
    const double f = p * oracle::gaussPdf(w, 1.0) + (1 - p) * oracle::gaussPdf(w, 1.0 + beta);
    if (f > 0) h -= f * std::log(f) * dw;
  }
  return (h - 0.5 * std::log(2 * std::numbers::pi * std::numbers::e)) / std::numbers::ln2;
}

}  // namespace

TEST(SleepWake, CostFunction) {
  EXPECT_EQ(costB(0.0, 0.5), 0.0);
  EXPECT_EQ(costB(2.0, 0.5), 4.5);
  EXPECT_EQ(costB(-1.0, 0.0), 1.0);
}

TEST(SleepWake, ZeroHarvestSleepsForever) {
  ChannelSpec spec;
  const SleepSolution s = sleepWakeCapacity(0.0, 0.5, spec);
  EXPECT_EQ(s.capacity, 0.0);
  EXPECT_EQ(s.sleepProb, 1.0);
  EXPECT_FALSE(s.wakeDist.has_value());
}

TEST(SleepWake, NonPositiveWakeBudgetIsAsleep) {
  ChannelSpec spec;
  // beta_p = 0.2 / 0.5 - 0.5 < 0
  const SleepSolution s = wakeCapacityAtP(0.5, 0.2, 0.5, spec);
  EXPECT_EQ(s.capacity, 0.0);
  EXPECT_THROW((void)wakeCapacityAtP(1.0, 0.2, 0.5, spec), Error);
}

TEST(SleepWake, PositiveCapacityWhereNoSleepFails) {
  ChannelSpec spec;
  for (double e : {0.1, 0.3, 0.5}) {
    EXPECT_EQ(processorEnergyRate(e, 0.5, 0.0, spec).rate, 0.0);
    const SleepSolution s = sleepWakeCapacity(e, 0.5, spec);
    EXPECT_GT(s.capacity, 0.0);
    EXPECT_GT(s.sleepProb, 0.0);
  }
}

TEST(SleepWake, OrderingAgainstBaselines) {
  ChannelSpec spec;
  for (double e : {0.2, 1.0, 2.5}) {
    const double c = sleepWakeCapacity(e, 0.5, spec).capacity;
    const double g = bestGaussianWake(e, 0.5, spec).rate;
    const double m = medaBaseline(e, 0.5, spec).rate;
    EXPECT_GE(c + 1e-6, g) << e;
    EXPECT_GE(g + 1e-6, m) << e;
    EXPECT_LT(c, oracle::halfLog2(e)) << e;
  }
}

TEST(SleepWake, SolutionIsCertified) {
  ChannelSpec spec;
  const SleepSolution s = sleepWakeCapacity(1.0, 0.5, spec);
  EXPECT_LE(s.kktResidual, 1e-6);
  EXPECT_LE(s.budgetUsed, 1.0 + 1e-9);
  const DiscreteDist law = s.inputLaw();
  EXPECT_NEAR(law.expect([](double x) { return costB(x, 0.5); }), s.budgetUsed, 1e-9);
  std::vector<double> xs(law.points().begin(), law.points().end()), ps(law.probs().begin(), law.probs().end());
  EXPECT_NEAR(s.capacity, oracle::discreteMI(xs, ps, 1.0), 1e-6);
}

TEST(SleepWake, GaussianWakeMatchesBruteForce) {
  ChannelSpec spec;
  for (double p : {0.0, 0.3, 0.7}) {
    const double beta = 1.0 / (1 - p) - 0.5;
    const auto g = gaussianWakeRate(p, 1.0, 0.5, spec);
    EXPECT_NEAR(g.total, gaussWakeOracle(p, beta), 1e-7) << p;
    EXPECT_NEAR(g.gaussPart, (1 - p) * oracle::halfLog2(beta), 1e-14);
    EXPECT_GE(g.total + 1e-12, g.gaussPart);
  }
}

TEST(SleepWake, OnOffChainRule) {
  ChannelSpec spec;
  const DiscreteDist wake({-1.5, 1.5}, {0.5, 0.5});
  const auto parts = onOffDecomposition(0.4, wake, spec);
  EXPECT_NEAR(parts.total, parts.onOffPart + parts.gaussPart, 1e-9);
  EXPECT_NEAR(parts.gaussPart, 0.6 * oracle::discreteMI({-1.5, 1.5}, {0.5, 0.5}, 1.0), 1e-7);
  EXPECT_THROW((void)onOffDecomposition(0.4, DiscreteDist({0.0, 1.0}, {0.5, 0.5}), spec), Error);
}

TEST(SleepWake, FreeWakeApproachesGaussian) {
  // With alpha = 0 sleeping is free and the cost is plain power; the discrete
  // optimum creeps toward the Gaussian capacity from below.
  ChannelSpec spec;
  const double c = sleepWakeCapacity(1.0, 0.0, spec).capacity;
  EXPECT_LE(c, oracle::halfLog2(1.0) + 1e-12);
  EXPECT_GT(c, oracle::halfLog2(1.0) - 2e-2);
}

TEST(SleepWake, SleepProbabilityFallsWithHarvest) {
  ChannelSpec spec;
  const auto rows = sleepWakeCurve({0.2, 0.6, 1.2, 2.0}, 0.5, spec);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    EXPECT_LE(rows[i].pStar, rows[i - 1].pStar + 1e-6);
    EXPECT_GT(rows[i].capacity, rows[i - 1].capacity);
  }
}

TEST(FadingSleepWake, SingleFadeReducesToScaledNoise) {
  ChannelSpec spec;
  const auto f = fadingSleepWakeCapacity(DiscreteDist::pointMass(2.0), 0.5, 0.5, spec);
  EXPECT_NEAR(f.capacity, sleepWakeCapacity(0.5, 0.5, spec.withNoise(0.25)).capacity, 1e-12);
}

TEST(FadingSleepWake, BudgetMetAndBetterThanUniform) {
  ChannelSpec spec;
  const DiscreteDist fades({0.5, 1.0, 1.2}, {0.1, 0.8, 0.1});
  const auto f = fadingSleepWakeCapacity(fades, 0.8, 0.5, spec);
  double spent = 0.0, uniform = 0.0;
  for (std::size_t i = 0; i < fades.size(); ++i) {
    const double h = fades.point(i);
    spent += fades.prob(i) * f.alloc.at(h);
    uniform += fades.prob(i) * sleepWakeCapacity(0.8, 0.5, spec.withNoise(1.0 / (h * h))).capacity;
  }
  EXPECT_LT(std::abs(spent - 0.8), 1e-6);
  EXPECT_GE(f.capacity + 1e-6, uniform);
}
