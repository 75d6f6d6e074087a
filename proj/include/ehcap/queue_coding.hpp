#pragma once

// Slotted data queue fed by arrivals and drained by an energy-limited code:
// each slot of n channel uses spends T_k = min(E_k, E[Y] - eps) and can carry
// n R_k bits, R_k = 0.5 log(1 + T_k / (n sigma^2)).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "ehcap/capacity_ideal.hpp"
#include "ehcap/core.hpp"
#include "ehcap/parallel.hpp"
#include "ehcap/sim.hpp"

namespace ehcap {

struct SlotConfig {
  int n = 1;
  DiscreteDist arrivals = DiscreteDist::pointMass(0.0);  // bits per slot
  DiscreteDist harvest = DiscreteDist::pointMass(0.0);   // energy per slot
  double noiseVar = 1.0;
  std::optional<double> eps;  // default 0.01 E[Y]

  [[nodiscard]] double epsilon() const { return eps.value_or(0.01 * harvest.mean()); }

  void validate() const {
    if (n < 1) fail("SlotConfig: n must be >= 1, got ", n);
    if (arrivals.minPoint() < 0.0) fail("SlotConfig: arrivals must be >= 0");
    if (harvest.minPoint() < 0.0) fail("SlotConfig: harvest must be >= 0");
    if (!(noiseVar > 0.0)) fail("SlotConfig: noiseVar must be positive, got ", noiseVar);
    const double e = epsilon();
    if (!(e >= 0.0)) fail("SlotConfig: eps must be >= 0, got ", e);
    if (harvest.mean() > 0.0 && !(e < harvest.mean()))
      fail("SlotConfig: eps must be below E[Y] = ", harvest.mean(), ", got ", e);
  }
};

/// Per-use rate R_k in base units; the slot carries n times this.
[[nodiscard]] inline double slotRate(double energyUsed, int n, double noiseVar, LogBase base = LogBase::bits) {
  if (!(energyUsed >= 0.0)) fail("slotRate: energy must be >= 0, got ", energyUsed);
  if (n < 1) fail("slotRate: n must be >= 1");
  if (!(noiseVar > 0.0)) fail("slotRate: noiseVar must be positive");
  return fromNats(halfLog1p(energyUsed / (n * noiseVar)), base);
}

/// Largest stable arrival rate, bits per slot: 0.5 n log(1 + E[Y] / (n sigma^2)).
[[nodiscard]] inline double stabilityBoundary(const DiscreteDist& harvest, int n, double noiseVar,
                                              LogBase base = LogBase::bits) {
  return n * slotRate(harvest.mean(), n, noiseVar, base);
}

enum class Verdict { stable, unstable, inconclusive };

[[nodiscard]] inline const char* toString(Verdict v) {
  switch (v) {
    case Verdict::stable: return "stable";
    case Verdict::unstable: return "unstable";
    case Verdict::inconclusive: return "inconclusive";
  }
  return "?";
}

struct QueueStats {
  double meanQueue = 0.0;
  double middleQuarterMean = 0.0;  // slots [N/4, N/2)
  double finalQuarterMean = 0.0;   // slots [3N/4, N)
  double finalQueue = 0.0;
  double slope = 0.0;  // least squares over the final half, bits per slot
  std::int64_t lowVisits = 0;  // slots with q_k < n R_k
  double meanService = 0.0;    // mean of n R_k whether used or not
  double meanServed = 0.0;     // bits actually removed per slot
  double meanArrival = 0.0;
};

struct QueueRun {
  QueueStats queue;
  TrajectoryStats energy;
  Verdict verdict = Verdict::inconclusive;
};

inline void to_json(nlohmann::json& j, const QueueRun& r) {
  const QueueStats& q = r.queue;
  j = nlohmann::json{{"verdict", toString(r.verdict)},
                     {"meanQueue", q.meanQueue},
                     {"middleQuarterMean", q.middleQuarterMean},
                     {"finalQuarterMean", q.finalQuarterMean},
                     {"finalQueue", q.finalQueue},
                     {"slope", q.slope},
                     {"lowVisits", q.lowVisits},
                     {"meanService", q.meanService},
                     {"meanServed", q.meanServed},
                     {"meanArrival", q.meanArrival},
                     {"energy", r.energy}};
}

/// Stable: the final-quarter mean queue is within 10% of the middle-quarter
/// mean and the queue drops below one slot's service at least slots/100
/// times. Unstable: the final-half slope exceeds 0.1 E[A] per slot.
[[nodiscard]] inline Verdict classifyQueue(const QueueStats& q, double meanArrival, std::int64_t slots) {
  const double ref = std::max(std::abs(q.middleQuarterMean), 1e-12);
  const bool flat = std::abs(q.finalQuarterMean - q.middleQuarterMean) <= 0.1 * ref ||
                    (q.finalQuarterMean == 0.0 && q.middleQuarterMean == 0.0);
  if (flat && q.lowVisits >= slots / 100) return Verdict::stable;
  if (q.slope > 0.1 * meanArrival) return Verdict::unstable;
  return Verdict::inconclusive;
}

[[nodiscard]] inline QueueRun simulateQueueSystem(const SlotConfig& cfg, std::int64_t slots, const RngStream& rng,
                                                  bool keepTrace = false) {
  cfg.validate();
  if (slots < 10000) fail("simulateQueueSystem: need at least 10^4 slots, got ", slots);
  const double target = cfg.harvest.mean() - cfg.epsilon();
  RngStream hs = rng.substream(detail::kHarvestStream);
  RngStream as = rng.substream(5);
  detail::StatsRecorder rec(slots, keepTrace);

  QueueRun out;
  QueueStats& st = out.queue;
  const std::int64_t half = slots / 2, q1 = slots / 4, q3 = 3 * slots / 4;
  // Least squares over the final half via running sums in centered time.
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0, midSum = 0.0, finSum = 0.0, qSum = 0.0;
  double e = 0.0, q = 0.0, served = 0.0, service = 0.0, arrived = 0.0;
  for (std::int64_t k = 0; k < slots; ++k) {
    const bool truncated = target > e;
    const double t = std::min(e, target);
    rec.record(k, e, t, truncated);
    const double bits = cfg.n * slotRate(t, cfg.n, cfg.noiseVar);
    service += bits;

    qSum += q;
    if (k >= q1 && k < half) midSum += q;
    if (k >= q3) finSum += q;
    if (k >= half) {
      const double x = static_cast<double>(k - half);
      sx += x;
      sy += q;
      sxx += x * x;
      sxy += x * q;
    }
    if (q < bits) ++st.lowVisits;

    const double a = as.sample(cfg.arrivals);
    arrived += a;
    if (q >= bits) {
      q -= bits;
      served += bits;
    }
    q += a;
    e = e - t + hs.sample(cfg.harvest);
  }
  const double n = static_cast<double>(slots), nh = static_cast<double>(slots - half);
  st.meanQueue = qSum / n;
  st.middleQuarterMean = midSum / static_cast<double>(half - q1);
  st.finalQuarterMean = finSum / static_cast<double>(slots - q3);
  st.finalQueue = q;
  const double den = nh * sxx - sx * sx;
  st.slope = den > 0.0 ? (nh * sxy - sx * sy) / den : 0.0;
  st.meanService = service / n;
  st.meanServed = served / n;
  st.meanArrival = arrived / n;
  out.energy = rec.finish();
  out.verdict = classifyQueue(st, cfg.arrivals.mean(), slots);
  return out;
}

/// Arrivals 0 or 2L with equal probability, so the mean load is L.
[[nodiscard]] inline DiscreteDist twoPointArrivals(double load) {
  if (!(load >= 0.0)) fail("twoPointArrivals: load must be >= 0");
  if (load == 0.0) return DiscreteDist::pointMass(0.0);
  return DiscreteDist({0.0, 2.0 * load}, {0.5, 0.5});
}

struct LoadRow {
  double loadFraction = 0.0;  // E[A] / boundary
  Verdict verdict = Verdict::inconclusive;
  double drift = 0.0;
  double meanQueue = 0.0;
};

/// One run per load fraction, sharing the seed so the sweep uses common
/// random numbers across loads.
[[nodiscard]] inline std::vector<LoadRow> loadSweep(SlotConfig cfg, const std::vector<double>& fractions,
                                                    std::int64_t slots, const RngStream& rng) {
  const double b = stabilityBoundary(cfg.harvest, cfg.n, cfg.noiseVar);
  std::vector<LoadRow> rows(fractions.size());
  parallelFor(fractions.size(), [&](std::size_t i) {
    SlotConfig c = cfg;
    c.arrivals = twoPointArrivals(fractions[i] * b);
    const QueueRun r = simulateQueueSystem(c, slots, rng);
    rows[i] = {fractions[i], r.verdict, r.queue.slope, r.queue.meanQueue};
  });
  return rows;
}

/// True when no load is stable while a smaller one is unstable.
[[nodiscard]] inline bool verdictsMonotone(const std::vector<LoadRow>& rows) {
  std::vector<LoadRow> s = rows;
  std::sort(s.begin(), s.end(), [](const LoadRow& a, const LoadRow& b) { return a.loadFraction < b.loadFraction; });
  bool seenUnstable = false;
  for (const auto& r : s) {
    if (r.verdict == Verdict::stable && seenUnstable) return false;
    if (r.verdict == Verdict::unstable) seenUnstable = true;
  }
  return true;
}

}  // namespace ehcap
