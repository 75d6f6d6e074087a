#include <gtest/gtest.h>

#include <cmath>

#include "ehcap/storage.hpp"
#include "oracles.hpp"

using namespace ehcap;

namespace {

const DiscreteDist kEx1({0.25, 0.5, 0.75, 1.0}, {0.25, 0.25, 0.25, 0.25});

// Root of b1 E[(Y-c)^+] = E[(c-Y)^+] + b2 by scanning each interval between
// harvest points, where the balance is affine in c.
double rootOracle(const DiscreteDist& y, double b1, double b2) {
  std::vector<double> knots{0.0};
  for (double p : y.points()) knots.push_back(p);
  for (std::size_t k = 0; k + 1 < knots.size(); ++k) {
    const double lo = knots[k], hi = knots[k + 1];
    // g(c) = A - B c on [lo, hi]
    double a = -b2, b = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
      const double yi = y.point(i), pi = y.prob(i);
      if (yi >= hi) a += b1 * pi * yi, b += b1 * pi;
      else a += pi * yi, b += pi;
    }
    const double c = a / b;
    if (c >= lo && c <= hi) return c;
  }
  return 0.0;
}

}  // namespace

TEST(Storage, LargestCSolvesBalance) {
  for (double b1 : {0.2, 0.5, 0.7, 0.95}) {
    for (double b2 : {0.0, 0.05}) {
      const double c = largestC(kEx1, b1, b2);
      EXPECT_NEAR(c, rootOracle(kEx1, b1, b2), 1e-11) << b1 << ' ' << b2;
      EXPECT_LT(std::abs(detail::storageBalance(kEx1, b1, b2, c)), 1e-11);
    }
  }
  EXPECT_NEAR(largestC(kEx1, 0.7, 0.0), 1.975 / 3.4, 1e-12);
}

TEST(Storage, LosslessStorageKeepsMean) {
  EXPECT_EQ(largestC(kEx1, 1.0, 0.0), kEx1.mean());
  ChannelSpec spec;
  EXPECT_EQ(rHUS(kEx1, 1.0, 0.0, spec).rate, rHSU(kEx1, 1.0, 0.0, spec).rate);
}

TEST(Storage, HsuClosedForm) {
  ChannelSpec spec;
  EXPECT_NEAR(rHSU(kEx1, 0.7, 0.0, spec), 0.5 * std::log2(1.4375), 1e-15);
  EXPECT_EQ(rHSU(kEx1, 0.1, 1.0, spec).rate, 0.0);
}

TEST(Storage, ZeroWhenLeakDominates) {
  ChannelSpec spec;
  EXPECT_EQ(largestC(kEx1, 0.5, 10.0), 0.0);
  EXPECT_EQ(rHUS(kEx1, 0.5, 10.0, spec).rate, 0.0);
}

TEST(Storage, Validation) {
  EXPECT_THROW((void)largestC(kEx1, 0.0, 0.0), Error);
  EXPECT_THROW((void)largestC(kEx1, 1.5, 0.0), Error);
  EXPECT_THROW((void)largestC(kEx1, 0.5, -0.1), Error);
}

TEST(Storage, ArchitectureOrdering) {
  ChannelSpec spec;
  std::vector<double> grid;
  for (int i = 1; i <= 10; ++i) grid.push_back(i / 10.0);
  const auto rows = architectureComparison(kEx1, grid, 0.0, spec);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_GE(rows[i].rateHUS + 1e-12, rows[i].rateHSU);
    if (i > 0) {
      EXPECT_GE(rows[i].rateHSU, rows[i - 1].rateHSU);
      EXPECT_GE(rows[i].rateHUS, rows[i - 1].rateHUS);
      EXPECT_DOUBLE_EQ(rows[i].rateHU, rows[0].rateHU);
    }
  }
  EXPECT_GT(rows.front().rateHU, rows.front().rateHSU);
  const auto x = huCrossing(rows);
  ASSERT_TRUE(x.has_value());
  EXPECT_GT(*x, 0.1);
  EXPECT_LT(*x, 1.0);
}

TEST(FadingStorage, UnitFadeCollapses) {
  ChannelSpec spec;
  const auto one = DiscreteDist::pointMass(1.0);
  const auto r = fadingStorageRates(kEx1, one, 0.7, 0.0, spec);
  EXPECT_NEAR(r.sCsit, rHSU(kEx1, 0.7, 0.0, spec), 1e-14);
  EXPECT_NEAR(r.sNoCsit, r.sCsit, 1e-14);
  EXPECT_NEAR(r.usCsit, rHUS(kEx1, 0.7, 0.0, spec), 1e-14);
  EXPECT_NEAR(r.huCsit, huCapacity(kEx1, spec), 1e-9);
}

TEST(FadingStorage, OrderingOverSweep) {
  ChannelSpec spec;
  const DiscreteDist fades({0.5, 1.0, 1.2}, {0.1, 0.8, 0.1});
  const auto rows = fadingArchitectureSweep(kEx1, fades, {0.3, 0.6, 1.0}, 0.0, spec);
  for (const auto& r : rows) {
    EXPECT_GE(r.usCsit + 1e-12, r.sCsit);
    EXPECT_GE(r.usNoCsit + 1e-12, r.sNoCsit);
    EXPECT_GE(r.sCsit + 1e-12, r.sNoCsit);
    EXPECT_GE(r.usCsit + 1e-12, r.usNoCsit);
  }
  EXPECT_NEAR(rows.back().usCsit, rows.back().sCsit, 1e-12);
}
