#include <gtest/gtest.h>

#include <cmath>

#include "ehcap/peak_capacity.hpp"
#include "oracles.hpp"

using namespace ehcap;

TEST(PeakCapacity, MatchesClosedFormAtSmallAmplitude) {
  ChannelSpec spec;
  for (double y : {0.25, 0.5, 1.0}) {
    const PeakSolution s = peakCapacity(y, spec);
    EXPECT_NEAR(s.capacity, oracle::peakClosedForm(y), 1e-3) << "y=" << y;
    EXPECT_LE(s.kktResidual, 1e-6) << "y=" << y;
    EXPECT_NEAR(closedFormPeak(y, spec), oracle::peakClosedForm(y), 1e-8) << "y=" << y;
  }
}

TEST(PeakCapacity, UnitAmplitudeIsBpsk) {
  ChannelSpec spec;
  const PeakSolution s = peakCapacity(1.0, spec);
  EXPECT_NEAR(s.capacity, 0.4859441541, 1e-8);
  ASSERT_EQ(s.dist.size(), 2u);
  EXPECT_NEAR(s.dist.prob(0), 0.5, 1e-9);
}

TEST(PeakCapacity, LargeAmplitudeGrowsSupport) {
  ChannelSpec spec;
  const PeakSolution s = peakCapacity(9.0, spec);
  EXPECT_GT(s.dist.size(), 2u);
  EXPECT_LE(s.kktResidual, 1e-6);
  EXPECT_LT(s.capacity, oracle::halfLog2(9.0));
  EXPECT_NEAR(s.capacity, oracle::discreteMI({s.dist.points().begin(), s.dist.points().end()},
                                             {s.dist.probs().begin(), s.dist.probs().end()}, 1.0),
              1e-6);
}

TEST(PeakCapacity, AveragePowerBindsBelowPeak) {
  ChannelSpec spec;
  const PeakSolution both = peakCapacity(4.0, spec, 1.0);
  EXPECT_LE(both.capacity, oracle::halfLog2(1.0) + 1e-9);
  EXPECT_LE(both.capacity, peakCapacity(4.0, spec).capacity + 1e-9);
  EXPECT_LE(both.dist.secondMoment(), 1.0 + 1e-7);
}

TEST(PeakCapacity, ZeroAndInvalid) {
  ChannelSpec spec;
  EXPECT_EQ(peakCapacity(0.0, spec).capacity, 0.0);
  EXPECT_THROW((void)peakCapacity(-1.0, spec), Error);
}

TEST(HarvestUse, AveragesPerSlotCapacities) {
  ChannelSpec spec;
  const DiscreteDist y({0.25, 1.0}, {0.5, 0.5});
  const double ref = 0.5 * oracle::peakClosedForm(0.25) + 0.5 * oracle::peakClosedForm(1.0);
  EXPECT_NEAR(huCapacity(y, spec), ref, 2e-3);
}

TEST(HarvestUse, FadingCsitAtLeastNoCsit) {
  ChannelSpec spec;
  const DiscreteDist y({0.25, 0.5, 0.75, 1.0}, {0.25, 0.25, 0.25, 0.25});
  const DiscreteDist h({0.5, 1.0, 1.2}, {0.1, 0.8, 0.1});
  EXPECT_GE(huFadingCapacity(y, h, true, spec).rate + 1e-9, huFadingCapacity(y, h, false, spec).rate);
  EXPECT_NEAR(huFadingCapacity(y, DiscreteDist::pointMass(1.0), true, spec).rate, huCapacity(y, spec).rate, 1e-9);
}

TEST(GridCapacity, TwoPointGridIsBpsk) {
  ChannelSpec spec;
  const PeakSolution s = gridPeakCapacity({-1.0, 1.0}, spec);
  EXPECT_NEAR(s.capacity, oracle::discreteMI({-1, 1}, {0.5, 0.5}, 1.0), 1e-7);
  EXPECT_EQ(gridPeakCapacity({0.3}, spec).capacity, 0.0);
}

TEST(GridCapacity, FineGridApproachesContinuous) {
  ChannelSpec spec;
  std::vector<double> g;
  for (int i = -20; i <= 20; ++i) g.push_back(i / 20.0 * 2.0);
  EXPECT_NEAR(gridPeakCapacity(g, spec).capacity, peakCapacity(4.0, spec).capacity, 1e-4);
}

TEST(PartialInfo, BoundedByFullInformation) {
  ChannelSpec spec;
  const DiscreteDist y({0.25, 1.0}, {0.5, 0.5});
  std::vector<double> grid;
  for (int i = -8; i <= 8; ++i) grid.push_back(i / 8.0);
  const ObsChannel full = {{1.0, 0.0}, {0.0, 1.0}};
  const ObsChannel none = {{1.0}, {1.0}};
  const double both = partialInfoCapacity(y, full, full, grid, spec).rate;
  const double enc = partialInfoCapacity(y, full, none, grid, spec).rate;
  const double blind = partialInfoCapacity(y, none, none, grid, spec).rate;
  EXPECT_LE(enc, both + 1e-6);
  EXPECT_LE(blind, enc + 1e-6);
  // Blind encoder must respect the smallest peak.
  EXPECT_NEAR(blind, gridPeakCapacity({-0.5, -0.375, -0.25, -0.125, 0, 0.125, 0.25, 0.375, 0.5}, spec).capacity, 1e-5);
}
