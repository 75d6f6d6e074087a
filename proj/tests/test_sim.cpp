#include <gtest/gtest.h>

#include <sstream>

#include "ehcap/sim.hpp"
#include "oracles.hpp"

using namespace ehcap;

namespace {
const DiscreteDist kEx1({0.25, 0.5, 0.75, 1.0}, {0.25, 0.25, 0.25, 0.25});
}

TEST(Buffer, ConstantPolicyDeliversTarget) {
  BufferSpec buf;
  const auto s = simulateBuffer(buf, kEx1, {PolicySpec::constant, 0.6}, 200000, RngStream(1, 0));
  EXPECT_NEAR(s.meanT, 0.6, 2e-3);
  EXPECT_LT(s.truncationRateFinalHalf, 1e-3);
}

TEST(Buffer, OverdrawnPolicyTruncates) {
  BufferSpec buf;
  const auto s = simulateBuffer(buf, kEx1, {PolicySpec::constant, 0.7}, 100000, RngStream(1, 0));
  EXPECT_GT(s.truncationRateFinalHalf, 0.05);
  EXPECT_NEAR(s.meanT, 0.625, 5e-3);
}

TEST(Buffer, TruncationFadesWithLength) {
  BufferSpec buf;
  const auto shortRun = simulateBuffer(buf, kEx1, {PolicySpec::constant, 0.61875}, 10000, RngStream(2, 0));
  const auto longRun = simulateBuffer(buf, kEx1, {PolicySpec::constant, 0.61875}, 1000000, RngStream(2, 0));
  EXPECT_LT(longRun.truncationRate, shortRun.truncationRate);
}

TEST(Buffer, ZeroHarvest) {
  BufferSpec buf;
  const auto s = simulateBuffer(buf, DiscreteDist::pointMass(0.0), {PolicySpec::constant, 0.5}, 1000, RngStream(0, 0));
  EXPECT_EQ(s.meanT, 0.0);
  EXPECT_EQ(s.truncationRate, 1.0);
  EXPECT_EQ(s.maxEnergy, 0.0);
}

TEST(Buffer, GammaCapsStoredEnergy) {
  BufferSpec buf;
  buf.gamma = 2.0;
  const auto s = simulateBuffer(buf, kEx1, {PolicySpec::constant, 0.1}, 50000, RngStream(3, 0));
  EXPECT_LE(s.maxEnergy, 2.0 + kEx1.maxPoint());
  EXPECT_NEAR(s.meanT, 0.1, 1e-4);  // empty buffer at k = 0
}

TEST(Buffer, HusSustainsLargestC) {
  BufferSpec buf;
  buf.arch = Arch::HUS;
  buf.beta1 = 0.7;
  const double c = largestC(kEx1, 0.7, 0.0);
  const auto s = simulateBuffer(buf, kEx1, {PolicySpec::constant, 0.99 * c}, 500000, RngStream(4, 0));
  EXPECT_NEAR(s.meanT, 0.99 * c, 3e-3);
  EXPECT_LT(s.truncationRateFinalHalf, 1e-3);
  const auto over = simulateBuffer(buf, kEx1, {PolicySpec::constant, 1.05 * c}, 500000, RngStream(4, 0));
  EXPECT_LT(over.meanT, 1.05 * c - 5e-3);
}

TEST(Buffer, HsuLosesStorageFraction) {
  BufferSpec buf;
  buf.arch = Arch::HSU;
  buf.beta1 = 0.5;
  const auto s = simulateBuffer(buf, kEx1, {PolicySpec::greedy, 0.0}, 200000, RngStream(5, 0));
  EXPECT_NEAR(s.meanT, 0.5 * kEx1.mean(), 2e-3);
}

TEST(Buffer, Deterministic) {
  BufferSpec buf;
  const auto a = simulateBuffer(buf, kEx1, {PolicySpec::constant, 0.6}, 20000, RngStream(9, 0), true);
  const auto b = simulateBuffer(buf, kEx1, {PolicySpec::constant, 0.6}, 20000, RngStream(9, 0), true);
  std::ostringstream sa, sb;
  writeTraceCsv(sa, a);
  writeTraceCsv(sb, b);
  EXPECT_EQ(sa.str(), sb.str());
  EXPECT_EQ(a.meanT, b.meanT);
  EXPECT_EQ(sa.str().substr(0, 14), "step,E_k,T_k\r\n");
}

TEST(Buffer, Validation) {
  BufferSpec buf;
  buf.arch = Arch::HU;
  EXPECT_THROW((void)simulateBuffer(buf, kEx1, {}, 10, RngStream(0, 0)), Error);
  buf.arch = Arch::ideal;
  buf.gamma = -1.0;
  EXPECT_THROW((void)simulateBuffer(buf, kEx1, {}, 10, RngStream(0, 0)), Error);
}

TEST(Signaling, TruncatedGaussianReachesIdeal) {
  SignalingParams prm;
  prm.harvest = kEx1;
  const auto r = simulateSignaling(Scheme::truncGauss, prm, 300000, RngStream(0, 0));
  EXPECT_NEAR(r.targetRate, oracle::halfLog2(0.625 * 0.99), 1e-15);
  EXPECT_NEAR(r.empiricalMI, oracle::halfLog2(0.625), 0.02 * oracle::halfLog2(0.625));
  EXPECT_LT(r.stats.truncationRateFinalHalf, 0.01);
  EXPECT_GT(r.stdErr, 0.0);
}

TEST(Signaling, ProcessingCostLowersRate) {
  SignalingParams prm;
  prm.harvest = kEx1;
  prm.meanProc = 0.1;
  const auto r = simulateSignaling(Scheme::truncGaussProc, prm, 300000, RngStream(0, 0));
  EXPECT_NEAR(r.empiricalMI, r.targetRate, 0.03 * r.targetRate);
  EXPECT_LT(r.targetRate, oracle::halfLog2(0.525));
}

TEST(Signaling, SingleFadeMatchesUnfaded) {
  SignalingParams prm;
  prm.harvest = kEx1;
  const auto a = simulateSignaling(Scheme::truncGauss, prm, 50000, RngStream(7, 0));
  prm.fades = DiscreteDist::pointMass(1.0);
  const auto b = simulateSignaling(Scheme::truncGaussFadingCSIT, prm, 50000, RngStream(7, 0));
  EXPECT_NEAR(a.empiricalMI, b.empiricalMI, 1e-12);
  EXPECT_EQ(a.stats.meanT, b.stats.meanT);
}

TEST(Signaling, FadingApproachesWaterfillRate) {
  SignalingParams prm;
  prm.harvest = kEx1;
  prm.fades = DiscreteDist({0.5, 1.0, 1.2}, {0.1, 0.8, 0.1});
  const auto r = simulateSignaling(Scheme::truncGaussFadingCSIT, prm, 300000, RngStream(0, 0));
  EXPECT_NEAR(r.empiricalMI, r.targetRate, 0.03 * r.targetRate);
  SignalingParams bad = prm;
  bad.fades.reset();
  EXPECT_THROW((void)simulateSignaling(Scheme::truncGaussFadingCSIT, bad, 10, RngStream(0, 0)), Error);
}
