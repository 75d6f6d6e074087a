#include <gtest/gtest.h>

#include <cmath>

#include "ehcap/queue_coding.hpp"

using namespace ehcap;

namespace {

SlotConfig ex1(double load) {
  SlotConfig c;
  c.n = 10;
  c.harvest = DiscreteDist({0.25, 0.5, 0.75, 1.0}, {0.25, 0.25, 0.25, 0.25});
  c.arrivals = twoPointArrivals(load);
  return c;
}

}  // namespace

TEST(Queue, SlotRate) {
  EXPECT_NEAR(slotRate(1.0, 10, 1.0), 0.5 * std::log2(1.1), 1e-15);
  EXPECT_NEAR(slotRate(1.0, 10, 1.0), 0.0688, 1e-4);
  EXPECT_EQ(slotRate(0.0, 3, 1.0), 0.0);
  EXPECT_THROW((void)slotRate(-1.0, 1, 1.0), Error);
  EXPECT_THROW((void)slotRate(1.0, 0, 1.0), Error);
}

TEST(Queue, BoundaryGrowsWithBlockLength) {
  const DiscreteDist y = DiscreteDist::pointMass(1.0);
  double prev = 0.0;
  for (int n : {1, 2, 5, 10, 100}) {
    const double b = stabilityBoundary(y, n, 1.0);
    EXPECT_GT(b, prev);
    EXPECT_LT(b, 0.5 / std::log(2.0));  // n -> inf limit E[Y] / (2 sigma^2 ln 2)
    prev = b;
  }
  EXPECT_NEAR(stabilityBoundary(ex1(0).harvest, 10, 1.0), 5 * std::log2(1.0625), 1e-14);
}

TEST(Queue, ServiceApproachesBoundary) {
  auto c = ex1(0.0);
  const auto r = simulateQueueSystem(c, 200000, RngStream(1, 0));
  const double b = stabilityBoundary(c.harvest, 10, 1.0);
  EXPECT_NEAR(r.queue.meanService, 10 * slotRate(c.harvest.mean() - c.epsilon(), 10, 1.0), 0.01 * b);
  EXPECT_EQ(r.verdict, Verdict::stable);
}

TEST(Queue, PhaseAcrossBoundary) {
  const double b = stabilityBoundary(ex1(0).harvest, 10, 1.0);
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    EXPECT_EQ(simulateQueueSystem(ex1(0.8 * b), 1000000, RngStream(seed, 0)).verdict, Verdict::stable);
    const auto over = simulateQueueSystem(ex1(1.2 * b), 1000000, RngStream(seed, 0));
    EXPECT_EQ(over.verdict, Verdict::unstable);
    EXPECT_NEAR(over.queue.slope, over.queue.meanArrival - over.queue.meanServed, 0.02 * b);
  }
}

TEST(Queue, ArrivalLaw) {
  const auto a = twoPointArrivals(0.3);
  EXPECT_DOUBLE_EQ(a.mean(), 0.3);
  EXPECT_EQ(a.size(), 2u);
  EXPECT_TRUE(twoPointArrivals(0.0).isDegenerate());
  EXPECT_THROW((void)twoPointArrivals(-1.0), Error);
}

TEST(Queue, Classifier) {
  QueueStats q;
  q.middleQuarterMean = 10.0;
  q.finalQuarterMean = 10.5;
  q.lowVisits = 100;
  EXPECT_EQ(classifyQueue(q, 1.0, 10000), Verdict::stable);
  q.lowVisits = 0;
  q.slope = 0.5;
  EXPECT_EQ(classifyQueue(q, 1.0, 10000), Verdict::unstable);
  q.slope = 0.05;
  EXPECT_EQ(classifyQueue(q, 1.0, 10000), Verdict::inconclusive);
}

TEST(Queue, SweepMonotone) {
  const auto rows = loadSweep(ex1(0), {0.5, 0.8, 1.2, 1.5}, 200000, RngStream(3, 0));
  EXPECT_TRUE(verdictsMonotone(rows));
  EXPECT_EQ(rows.front().verdict, Verdict::stable);
  EXPECT_EQ(rows.back().verdict, Verdict::unstable);
  std::vector<LoadRow> bad = {{0.5, Verdict::unstable, 0, 0}, {1.0, Verdict::stable, 0, 0}};
  EXPECT_FALSE(verdictsMonotone(bad));
}

TEST(Queue, Validation) {
  auto c = ex1(0.1);
  EXPECT_THROW((void)simulateQueueSystem(c, 100, RngStream(0, 0)), Error);
  c.eps = 1.0;
  EXPECT_THROW((void)simulateQueueSystem(c, 10000, RngStream(0, 0)), Error);
  c = ex1(0.1);
  c.n = 0;
  EXPECT_THROW((void)simulateQueueSystem(c, 10000, RngStream(0, 0)), Error);
}

TEST(Queue, Deterministic) {
  const auto a = simulateQueueSystem(ex1(0.3), 20000, RngStream(5, 0));
  const auto b = simulateQueueSystem(ex1(0.3), 20000, RngStream(5, 0));
  EXPECT_EQ(a.queue.meanQueue, b.queue.meanQueue);
  EXPECT_EQ(a.queue.finalQueue, b.queue.finalQueue);
}
