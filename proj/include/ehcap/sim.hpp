#pragma once

// Seeded Monte Carlo for the buffer recursions and the truncated Gaussian
// signaling used in the achievability arguments. Every random source has its
// own substream, so changing one scheme detail never shifts another draw.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <ostream>
#include <vector>

#include "ehcap/capacity_ideal.hpp"
#include "ehcap/core.hpp"
#include "ehcap/storage.hpp"

namespace ehcap {

struct BufferSpec {
  Arch arch = Arch::ideal;  // ideal, HSU or HUS
  double beta1 = 1.0;
  double beta2 = 0.0;
  std::optional<double> gamma;  // storage cap; unbounded when absent
  int slotSize = 1;             // channel uses sharing one slot's energy

  void validate() const {
    if (arch == Arch::HU) fail("BufferSpec: HU has no buffer to simulate");
    if (arch != Arch::ideal) StorageSpec{beta1, beta2, arch}.validate();
    if (gamma && !(*gamma >= 0.0)) fail("BufferSpec: gamma must be >= 0, got ", *gamma);
    if (slotSize < 1) fail("BufferSpec: slotSize must be >= 1, got ", slotSize);
  }
};

/// T_k = min(available, target) per channel use (constant), or everything
/// available (greedy).
struct PolicySpec {
  enum Kind { constant, greedy } kind = constant;
  double target = 0.0;
};

struct TracePoint {
  std::int64_t step;
  double energy;
  double used;
};

struct TrajectoryStats {
  std::int64_t steps = 0;
  double meanT = 0.0;  // per channel use
  double truncationRate = 0.0;
  double truncationRateFinalHalf = 0.0;
  double minEnergyTail = 0.0;  // min E_k over the last 10% of steps
  double maxEnergy = 0.0;
  std::vector<TracePoint> energyTrace;
};

inline void to_json(nlohmann::json& j, const TrajectoryStats& s) {
  j = nlohmann::json{{"steps", s.steps},
                     {"meanT", s.meanT},
                     {"truncationRate", s.truncationRate},
                     {"truncationRateFinalHalf", s.truncationRateFinalHalf},
                     {"minEnergyTail", s.minEnergyTail},
                     {"maxEnergy", s.maxEnergy},
                     {"tracePoints", s.energyTrace.size()}};
}

inline void writeTraceCsv(std::ostream& os, const TrajectoryStats& s) {
  os << "step,E_k,T_k\r\n";
  os.precision(17);
  for (const auto& p : s.energyTrace) os << p.step << ',' << p.energy << ',' << p.used << "\r\n";
}

namespace detail {

enum : std::uint64_t { kHarvestStream = 1, kNoiseStream = 2, kCodeStream = 3, kFadeStream = 4 };

// Accumulates the per-step statistics shared by every simulation.
class StatsRecorder {
public:
  StatsRecorder(std::int64_t steps, bool keepTrace) : steps_(steps), keepTrace_(keepTrace) {
    every_ = std::max<std::int64_t>(1, (steps + 9999) / 10000);
    tailStart_ = steps - std::max<std::int64_t>(1, steps / 10);
    s_.steps = steps;
    s_.minEnergyTail = std::numeric_limits<double>::infinity();
  }

  void record(std::int64_t k, double energy, double used, bool truncated) {
    sumT_ += used;
    if (truncated) {
      ++trunc_;
      if (k >= steps_ / 2) ++truncLate_;
    }
    if (k >= tailStart_) s_.minEnergyTail = std::min(s_.minEnergyTail, energy);
    s_.maxEnergy = std::max(s_.maxEnergy, energy);
    if (keepTrace_ && k % every_ == 0) s_.energyTrace.push_back({k, energy, used});
  }

  TrajectoryStats finish(int slotSize = 1) {
    if (steps_ > 0) {
      s_.meanT = sumT_ / static_cast<double>(steps_) / slotSize;
      s_.truncationRate = static_cast<double>(trunc_) / static_cast<double>(steps_);
      const std::int64_t late = steps_ - steps_ / 2;
      s_.truncationRateFinalHalf = late > 0 ? static_cast<double>(truncLate_) / static_cast<double>(late) : 0.0;
    } else {
      s_.minEnergyTail = 0.0;
    }
    return s_;
  }

private:
  std::int64_t steps_;
  bool keepTrace_;
  std::int64_t every_ = 1, tailStart_ = 0;
  std::int64_t trunc_ = 0, truncLate_ = 0;
  double sumT_ = 0.0;
  TrajectoryStats s_;
};

}  // namespace detail

/// One energy-buffer trajectory from an empty buffer.
///   ideal: E' = min(E - T, Gamma) + Y
///   HSU:   E' = min(((E - T) - beta2)^+, Gamma) + beta1 Y
///   HUS:   E' = min(((E + beta1 (Y - T)^+ - (T - Y)^+)^+ - beta2)^+, Gamma)
/// In HUS the slot's harvest is usable in the same slot, so the policy sees
/// E + Y; elsewhere it sees E. Requests beyond what is available are clamped
/// and counted as truncations.
[[nodiscard]] inline TrajectoryStats simulateBuffer(const BufferSpec& buf, const DiscreteDist& harvest,
                                                    const PolicySpec& policy, std::int64_t steps, const RngStream& rng,
                                                    bool keepTrace = false) {
  buf.validate();
  if (harvest.minPoint() < 0.0) fail("simulateBuffer: harvest must be >= 0");
  if (steps < 0) fail("simulateBuffer: steps must be >= 0");
  if (!(policy.target >= 0.0)) fail("simulateBuffer: policy target must be >= 0");
  RngStream hs = rng.substream(detail::kHarvestStream);
  const double cap = buf.gamma.value_or(std::numeric_limits<double>::infinity());
  const double m = buf.slotSize;
  detail::StatsRecorder rec(steps, keepTrace);
  double e = 0.0;
  for (std::int64_t k = 0; k < steps; ++k) {
    const double y = hs.sample(harvest);
    const double avail = buf.arch == Arch::HUS ? e + y : e;
    const double want = policy.kind == PolicySpec::greedy ? avail : m * policy.target;
    const bool truncated = policy.kind == PolicySpec::constant && want > avail;
    const double t = std::min(want, avail);
    rec.record(k, e, t, truncated);
    switch (buf.arch) {
      case Arch::HSU: e = std::min(std::max(e - t - buf.beta2, 0.0), cap) + buf.beta1 * y; break;
      case Arch::HUS:
        e = std::max(e + buf.beta1 * std::max(y - t, 0.0) - std::max(t - y, 0.0), 0.0);
        e = std::min(std::max(e - buf.beta2, 0.0), cap);
        break;
      default: e = std::min(std::max(e - t, 0.0), cap) + y; break;
    }
  }
  return rec.finish(buf.slotSize);
}

enum class Scheme { truncGauss, truncGaussProc, truncGaussFadingCSIT };

[[nodiscard]] inline const char* toString(Scheme s) {
  switch (s) {
    case Scheme::truncGauss: return "truncGauss";
    case Scheme::truncGaussProc: return "truncGaussProc";
    case Scheme::truncGaussFadingCSIT: return "truncGaussFadingCSIT";
  }
  return "?";
}

struct SignalingParams {
  DiscreteDist harvest = DiscreteDist::pointMass(0.0);
  std::optional<DiscreteDist> fades;
  double meanProc = 0.0;
  std::optional<double> eps;  // default 0.01 E[Y]
  ChannelSpec channel;
};

struct SignalingResult {
  TrajectoryStats stats;
  double empiricalMI = 0.0;  // channel.logBase units
  double stdErr = 0.0;
  double targetRate = 0.0;  // the closed-form rate the scheme is built to reach
};

inline void to_json(nlohmann::json& j, const SignalingResult& r) {
  j = nlohmann::json{
      {"stats", r.stats}, {"empiricalMI", r.empiricalMI}, {"stdErr", r.stdErr}, {"targetRate", r.targetRate}};
}

/// Gaussian codeword symbols X' clipped to what the buffer holds:
///   truncGauss:           X = sgn(X') min(|X'|, sqrt(E)),  X' ~ N(0, E[Y] - eps)
///   truncGaussProc:       X = sgn(X') min(|X'|, sqrt((E - Z)^+)), Z = meanProc
///                         charged whenever the node is awake
///   truncGaussFadingCSIT: X = sgn(X') min(sqrt(T(H)) |X'|, sqrt(E)), X' ~ N(0, 1),
///                         T water-filled with mean E[Y] - eps
/// The MI estimate averages log f(w | x') / f_W(w) where f_W is the output
/// law the scheme converges to (Gaussian, given H under fading). Clipping
/// shows up as mismatch between x and x', so the estimate only reaches the
/// target when clipping dies out.
[[nodiscard]] inline SignalingResult simulateSignaling(Scheme scheme, const SignalingParams& prm, std::int64_t steps,
                                                       const RngStream& rng, bool keepTrace = false) {
  prm.channel.validate();
  if (prm.harvest.minPoint() < 0.0) fail("simulateSignaling: harvest must be >= 0");
  if (steps < 1) fail("simulateSignaling: steps must be >= 1");
  if (scheme == Scheme::truncGaussFadingCSIT && !prm.fades)
    fail("simulateSignaling: truncGaussFadingCSIT needs fades");
  const double ey = prm.harvest.mean();
  const double eps = prm.eps.value_or(0.01 * ey);
  if (!(eps >= 0.0)) fail("simulateSignaling: eps must be >= 0");
  const double z = scheme == Scheme::truncGaussProc ? prm.meanProc : 0.0;
  if (!(z >= 0.0)) fail("simulateSignaling: meanProc must be >= 0");
  const double power = std::max(0.0, ey - z - eps);
  const double s2 = prm.channel.noiseVar;

  SignalingResult out;
  std::optional<WaterfillResult> wf;
  if (scheme == Scheme::truncGaussFadingCSIT) {
    wf = waterfill(*prm.fades, power, prm.channel);
    out.targetRate = ergodicCapacityCSIT(*prm.fades, power, prm.channel).rate;
  } else {
    out.targetRate = fromNats(halfLog1p(power / s2), prm.channel.logBase);
  }

  RngStream hs = rng.substream(detail::kHarvestStream);
  RngStream ns = rng.substream(detail::kNoiseStream);
  RngStream cs = rng.substream(detail::kCodeStream);
  RngStream fs = rng.substream(detail::kFadeStream);
  detail::StatsRecorder rec(steps, keepTrace);

  // Batch means over 100 batches give the standard error of the estimate.
  const std::int64_t nb = std::min<std::int64_t>(100, steps);
  std::vector<double> batch(static_cast<std::size_t>(nb), 0.0);
  double e = 0.0, sum = 0.0;
  for (std::int64_t k = 0; k < steps; ++k) {
    const double u = cs.normal();
    double h = 1.0, t = power;
    if (wf) {
      h = fs.sample(*prm.fades);
      t = wf->at(h);
    }
    const double xPrime = std::sqrt(t) * u;
    const bool awake = scheme != Scheme::truncGaussProc || power > 0.0;
    const double usable = awake ? std::max(e - z, 0.0) : e;
    const double amp = std::sqrt(usable);
    const bool truncated = std::abs(xPrime) > amp;
    const double x = std::copysign(std::min(std::abs(xPrime), amp), xPrime);
    const double spent = x * x + (awake ? std::min(z, e) : 0.0);
    rec.record(k, e, spent, truncated);

    const double w = h * x + std::sqrt(s2) * ns.normal();
    double info = 0.0;
    const double outVar = h * h * t + s2;
    if (outVar > s2) {
      const double d = w - h * xPrime;
      info = 0.5 * std::log(outVar / s2) - d * d / (2.0 * s2) + w * w / (2.0 * outVar);
    }
    sum += info;
    batch[static_cast<std::size_t>(k * nb / steps)] += info;
    e = e - spent + hs.sample(prm.harvest);
  }
  out.stats = rec.finish();
  const double mean = sum / static_cast<double>(steps);
  double var = 0.0;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const std::int64_t lo = static_cast<std::int64_t>(b) * steps / nb, hi = (static_cast<std::int64_t>(b) + 1) * steps / nb;
    const double bm = batch[b] / static_cast<double>(hi - lo);
    var += (bm - mean) * (bm - mean);
  }
  const double se = nb > 1 ? std::sqrt(var / (nb - 1) / nb) : 0.0;
  out.empiricalMI = fromNats(mean, prm.channel.logBase);
  out.stdErr = fromNats(se, prm.channel.logBase);
  return out;
}

}  // namespace ehcap
