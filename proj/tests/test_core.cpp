#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "ehcap/core.hpp"
#include "oracles.hpp"

using namespace ehcap;

TEST(DiscreteDist, RejectsBadInput) {
  EXPECT_THROW(DiscreteDist({}, {}), Error);
  EXPECT_THROW(DiscreteDist({0.0, 1.0}, {0.5}), Error);
  EXPECT_THROW(DiscreteDist({0.0, 1.0}, {0.6, 0.6}), Error);
  EXPECT_THROW(DiscreteDist({1.0, 0.0}, {0.5, 0.5}), Error);
  EXPECT_THROW(DiscreteDist({0.0, 1.0}, {-0.1, 1.1}), Error);
}

TEST(DiscreteDist, NormalizedFlagsRescale) {
  bool flag = false;
  const auto d = DiscreteDist::normalized({0.5, 1.0, 1.2}, {0.1, 0.7, 0.1}, &flag);
  EXPECT_TRUE(flag);
  EXPECT_NEAR(d.prob(1), 0.7 / 0.9, 1e-15);
  (void)DiscreteDist::normalized({0.0, 1.0}, {0.5, 0.5}, &flag);
  EXPECT_FALSE(flag);
}

TEST(DiscreteDist, FromPairsMergesAndDropsZeros) {
  const auto d = DiscreteDist::fromPairs({{1.0, 0.25}, {0.0, 0.5}, {1.0, 0.25}, {3.0, 0.0}});
  ASSERT_EQ(d.size(), 2u);
  EXPECT_DOUBLE_EQ(d.prob(1), 0.5);
  EXPECT_DOUBLE_EQ(d.mean(), 0.5);
}

TEST(DiscreteDist, Moments) {
  const DiscreteDist d({0.25, 0.5, 0.75, 1.0}, {0.25, 0.25, 0.25, 0.25});
  EXPECT_DOUBLE_EQ(d.mean(), 0.625);
  EXPECT_DOUBLE_EQ(d.secondMoment(), (0.0625 + 0.25 + 0.5625 + 1.0) / 4);
  EXPECT_DOUBLE_EQ(d.scaled(2.0).maxPoint(), 2.0);
}

TEST(RngStream, DeterministicAndIndependentStreams) {
  RngStream a(7, 1), b(7, 1), c(7, 2);
  bool allSame = true;
  for (int i = 0; i < 100; ++i) {
    const auto x = a(), y = b(), z = c();
    EXPECT_EQ(x, y);
    allSame = allSame && x == z;
  }
  EXPECT_FALSE(allSame);
  EXPECT_NE(RngStream(7, 1).substream(1)(), RngStream(7, 1).substream(2)());
}

TEST(RngStream, NormalMoments) {
  RngStream r(1, 0);
  double s = 0, s2 = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double x = r.normal();
    s += x, s2 += x * x;
  }
  EXPECT_NEAR(s / n, 0.0, 0.01);
  EXPECT_NEAR(s2 / n, 1.0, 0.01);
}

TEST(RngStream, SampleMatchesLaw) {
  const DiscreteDist d({0.0, 1.0, 2.0}, {0.2, 0.3, 0.5});
  RngStream r(3, 0);
  double cnt[3] = {0, 0, 0};
  const int n = 100000;
  for (int i = 0; i < n; ++i) cnt[static_cast<int>(r.sample(d))] += 1;
  EXPECT_NEAR(cnt[0] / n, 0.2, 0.005);
  EXPECT_NEAR(cnt[2] / n, 0.5, 0.005);
}

TEST(Quadrature, GaussHermiteMoments) {
  ChannelSpec spec;
  EXPECT_NEAR(gaussExpect([](double x) { return x * x; }, 0.0, 2.0, spec), 2.0, 1e-12);
  EXPECT_NEAR(gaussExpect([](double x) { return x * x * x * x; }, 1.0, 1.0, spec), 1 + 6 + 3, 1e-10);
}

TEST(Quadrature, IntegrateSmooth) {
  EXPECT_NEAR(integrate([](double x) { return std::exp(-x * x); }, -10, 10, 0.5), std::sqrt(std::numbers::pi), 1e-12);
  EXPECT_NEAR(integrate([](double x) { return std::sin(x); }, 0, std::numbers::pi, 0.3), 2.0, 1e-12);
}

TEST(MutualInformation, BpskMatchesBruteForce) {
  ChannelSpec spec;
  const DiscreteDist bpsk({-1.0, 1.0}, {0.5, 0.5});
  const double ref = oracle::discreteMI({-1.0, 1.0}, {0.5, 0.5}, 1.0);
  EXPECT_NEAR(discreteInputMI(bpsk, spec), ref, 1e-7);
  EXPECT_NEAR(discreteInputMI(bpsk, spec), 0.4859441541, 1e-8);
}

TEST(MutualInformation, AsymmetricLawMatchesBruteForce) {
  ChannelSpec spec;
  spec.noiseVar = 0.5;
  const DiscreteDist d({-2.0, 0.0, 0.7, 3.0}, {0.1, 0.4, 0.3, 0.2});
  const double ref = oracle::discreteMI({-2.0, 0.0, 0.7, 3.0}, {0.1, 0.4, 0.3, 0.2}, 0.5);
  EXPECT_NEAR(discreteInputMI(d, spec), ref, 1e-7);
  EXPECT_NEAR(discreteInputMIDensity(d, spec), ref, 1e-6);
}

TEST(MutualInformation, PointMassIsZero) {
  ChannelSpec spec;
  EXPECT_NEAR(discreteInputMI(DiscreteDist::pointMass(1.3), spec), 0.0, 1e-12);
}

TEST(MutualInformation, NatsAndBitsAgree) {
  ChannelSpec bits, nats;
  nats.logBase = LogBase::nats;
  const DiscreteDist d({-1.0, 1.0}, {0.5, 0.5});
  EXPECT_NEAR(discreteInputMI(d, nats), discreteInputMI(d, bits) * std::numbers::ln2, 1e-13);
}

TEST(ChannelSpec, Validation) {
  ChannelSpec s;
  s.noiseVar = -1;
  EXPECT_THROW(s.validate(), Error);
  s.noiseVar = 0;
  EXPECT_THROW(s.validate(), Error);
}
