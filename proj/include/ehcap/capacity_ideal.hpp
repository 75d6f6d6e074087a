#pragma once

// Closed-form capacities for the infinite-buffer transmitter: AWGN with
// harvested mean power, processor-energy loss, and ergodic fading with or
// without channel knowledge at the transmitter.

#include <cmath>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "ehcap/core.hpp"

namespace ehcap {

enum class Method { closedForm, optimized, monteCarlo };

[[nodiscard]] inline const char* toString(Method m) {
  switch (m) {
    case Method::closedForm: return "closed-form";
    case Method::optimized: return "optimized";
    case Method::monteCarlo: return "monte-carlo";
  }
  return "?";
}

struct RateResult {
  double rate = 0.0;
  Method method = Method::closedForm;
  LogBase logBase = LogBase::bits;
  std::map<std::string, double> meta;  // residuals, seeds, standard errors

  operator double() const { return rate; }
};

inline void to_json(nlohmann::json& j, const RateResult& r) {
  j = nlohmann::json{{"rate", r.rate}, {"method", toString(r.method)}, {"logBase", toString(r.logBase)}};
  if (!r.meta.empty()) j["meta"] = r.meta;
}

[[nodiscard]] inline RateResult closedForm(double natsValue, const ChannelSpec& spec) {
  return {fromNats(std::max(0.0, natsValue), spec.logBase), Method::closedForm, spec.logBase, {}};
}

/// Default slack below the mean harvest used by policies.
[[nodiscard]] inline double defaultEps(double meanHarvest) { return std::max(1e-3 * meanHarvest, 1e-6); }

/// 0.5 log(1 + snr) in nats.
[[nodiscard]] inline double halfLog1p(double snr) { return 0.5 * std::log1p(std::max(0.0, snr)); }

[[nodiscard]] inline RateResult idealCapacity(double meanHarvest, const ChannelSpec& spec) {
  spec.validate();
  if (!(meanHarvest >= 0.0)) fail("idealCapacity: meanHarvest must be >= 0, got ", meanHarvest);
  return closedForm(halfLog1p(meanHarvest / spec.noiseVar), spec);
}

[[nodiscard]] inline RateResult processorEnergyRate(double meanHarvest, double meanProc, double eps,
                                                    const ChannelSpec& spec) {
  spec.validate();
  const double budget = meanHarvest - meanProc - eps;
  if (!(budget > 0.0)) return closedForm(0.0, spec);
  return closedForm(halfLog1p(budget / spec.noiseVar), spec);
}

struct WaterfillResult {
  double cutoff = 0.0;            // H0; 0 when the budget is 0
  std::map<double, double> alloc;  // fade -> T*(h)
  double budget = 0.0;
  int iterations = 0;
  double residual = 0.0;  // |E_H[T*] - budget|

  [[nodiscard]] double at(double h) const {
    auto it = alloc.find(h);
    return it == alloc.end() ? 0.0 : it->second;
  }
};

inline void to_json(nlohmann::json& j, const WaterfillResult& w) {
  nlohmann::json a = nlohmann::json::array();
  for (const auto& [h, t] : w.alloc) a.push_back({h, t});
  j = nlohmann::json{{"cutoff", w.cutoff}, {"budget", w.budget}, {"alloc", a}, {"residual", w.residual}};
}

/// Water-filling over fade gains: T*(h) = (1/H0 - 1/h)^+ with E_H[T*] = budget.
/// The power profile is in gain units, so SNR = h^2 T / sigma^2 follows the
/// capacity expression; the allocation itself never involves sigma^2.
[[nodiscard]] inline WaterfillResult waterfill(const DiscreteDist& fades, double budget, const ChannelSpec& spec) {
  spec.validate();
  if (!(budget >= 0.0)) fail("waterfill: budget must be >= 0, got ", budget);
  if (fades.minPoint() < 0.0) fail("waterfill: fade gains must be >= 0, got ", fades.minPoint());

  std::vector<double> hs, ps;
  for (std::size_t i = 0; i < fades.size(); ++i) {
    if (fades.point(i) <= 0.0 || fades.prob(i) <= 0.0) continue;
    hs.push_back(fades.point(i));
    ps.push_back(fades.prob(i));
  }
  WaterfillResult r;
  r.budget = budget;
  for (std::size_t i = 0; i < fades.size(); ++i) r.alloc[fades.point(i)] = 0.0;
  if (hs.empty()) {
    if (budget > 0.0) fail("waterfill: every fade state has zero gain; budget cannot be spent");
    return r;
  }
  if (budget == 0.0) return r;

  auto spend = [&](double h0) {
    double s = 0.0;
    for (std::size_t i = 0; i < hs.size(); ++i) s += ps[i] * std::max(1.0 / h0 - 1.0 / hs[i], 0.0);
    return s;
  };
  // spend() is decreasing in h0; at h0 = max fade it is 0 <= budget.
  double lo = 1e-12, hi = hs.back();
  if (spend(lo) < budget) {
    // Only reachable for enormous budgets; the cutoff then lies below 1e-12.
    while (spend(lo) < budget) lo *= 1e-3;
  }
  double h0 = 0.5 * (lo + hi);
  for (r.iterations = 0; r.iterations < 200; ++r.iterations) {
    h0 = 0.5 * (lo + hi);
    const double s = spend(h0);
    if (std::abs(s - budget) < 1e-12 * std::max(1.0, budget)) break;
    (s > budget ? lo : hi) = h0;
  }
  // Bisection pins H0; the level 1/H0 on the active set is then solved
  // exactly so the budget holds to rounding.
  double invSum = 0.0, pSum = 0.0;
  for (std::size_t i = 0; i < hs.size(); ++i) {
    if (1.0 / h0 - 1.0 / hs[i] > 0.0) {
      invSum += ps[i] / hs[i];
      pSum += ps[i];
    }
  }
  if (pSum > 0.0) {
    const double level = (budget + invSum) / pSum;
    bool consistent = true;
    for (std::size_t i = 0; i < hs.size(); ++i) {
      const bool active = 1.0 / h0 - 1.0 / hs[i] > 0.0;
      if (active != (level - 1.0 / hs[i] > 0.0)) consistent = false;
    }
    if (consistent) h0 = 1.0 / level;
  }
  r.cutoff = h0;
  double used = 0.0;
  for (std::size_t i = 0; i < hs.size(); ++i) {
    const double t = std::max(1.0 / h0 - 1.0 / hs[i], 0.0);
    r.alloc[hs[i]] = t;
    used += ps[i] * t;
  }
  r.residual = std::abs(used - budget);
  return r;
}

[[nodiscard]] inline RateResult ergodicCapacityCSIT(const DiscreteDist& fades, double budget,
                                                    const ChannelSpec& spec) {
  const WaterfillResult w = waterfill(fades, budget, spec);
  double c = 0.0;
  for (std::size_t i = 0; i < fades.size(); ++i) {
    const double h = fades.point(i);
    c += fades.prob(i) * halfLog1p(h * h * w.at(h) / spec.noiseVar);
  }
  RateResult r = closedForm(c, spec);
  r.meta["cutoff"] = w.cutoff;
  r.meta["budgetResidual"] = w.residual;
  return r;
}

[[nodiscard]] inline RateResult ergodicCapacityNoCSIT(const DiscreteDist& fades, double meanHarvest,
                                                      const ChannelSpec& spec) {
  spec.validate();
  if (!(meanHarvest >= 0.0)) fail("ergodicCapacityNoCSIT: meanHarvest must be >= 0, got ", meanHarvest);
  const double c = fades.expect([&](double h) { return halfLog1p(h * h * meanHarvest / spec.noiseVar); });
  return closedForm(c, spec);
}

/// (CSIT, no-CSIT) rates when processing eats meanProc per channel use.
[[nodiscard]] inline std::pair<RateResult, RateResult> fadingProcessorRates(const DiscreteDist& fades,
                                                                            double meanHarvest,
                                                                            double meanProc, double eps,
                                                                            const ChannelSpec& spec) {
  const double budget = meanHarvest - meanProc - eps;
  if (!(budget > 0.0)) return {closedForm(0.0, spec), closedForm(0.0, spec)};
  return {ergodicCapacityCSIT(fades, budget, spec), ergodicCapacityNoCSIT(fades, budget, spec)};
}

}  // namespace ehcap
