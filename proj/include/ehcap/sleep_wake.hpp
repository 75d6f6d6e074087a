#pragma once

// Processing energy with a sleep mode: the input pays b(x) = x^2 + alpha
// whenever it is nonzero, so the optimal law mixes a sleep mass p at 0 with a
// discrete wake law. Includes the ON-OFF decomposition, the Gaussian-wake and
// bursty-Gaussian baselines, and per-fade power allocation under fading.

#include <cmath>
#include <map>
#include <optional>
#include <vector>

#include "ehcap/capacity_ideal.hpp"
#include "ehcap/core.hpp"
#include "ehcap/detail/input_optimizer.hpp"
#include "ehcap/parallel.hpp"

namespace ehcap {

[[nodiscard]] inline double costB(double x, double alpha) { return x == 0.0 ? 0.0 : x * x + alpha; }

struct SleepSolution {
  double sleepProb = 1.0;
  std::optional<DiscreteDist> wakeDist;  // empty when the node never wakes
  double capacity = 0.0;
  double kktResidual = 0.0;
  double lagrange = 0.0;  // logBase units per unit of cost
  double budgetUsed = 0.0;
  LogBase logBase = LogBase::bits;

  /// Full input law: mass p at 0 plus (1 - p) times the wake law.
  [[nodiscard]] DiscreteDist inputLaw() const {
    if (!wakeDist) return DiscreteDist::pointMass(0.0);
    std::vector<std::pair<double, double>> pairs{{0.0, sleepProb}};
    for (std::size_t i = 0; i < wakeDist->size(); ++i)
      pairs.emplace_back(wakeDist->point(i), (1.0 - sleepProb) * wakeDist->prob(i));
    return DiscreteDist::fromPairs(std::move(pairs));
  }
};

inline void to_json(nlohmann::json& j, const SleepSolution& s) {
  j = nlohmann::json{{"sleepProb", s.sleepProb},   {"capacity", s.capacity}, {"kktResidual", s.kktResidual},
                     {"lagrange", s.lagrange},     {"budgetUsed", s.budgetUsed},
                     {"logBase", toString(s.logBase)}};
  j["wakeDist"] = s.wakeDist ? nlohmann::json(*s.wakeDist) : nlohmann::json(nullptr);
}

namespace detail {

inline SleepSolution toSleepSolution(const InputSolution& sol, const ChannelSpec& spec) {
  SleepSolution s;
  s.logBase = spec.logBase;
  const DiscreteDist& d = sol.dist;
  double p0 = 0.0;
  std::vector<std::pair<double, double>> wake;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (d.point(i) == 0.0)
      p0 = d.prob(i);
    else
      wake.emplace_back(d.point(i), d.prob(i));
  }
  s.sleepProb = p0;
  if (!wake.empty() && p0 < 1.0) s.wakeDist = DiscreteDist::fromPairs(std::move(wake));
  s.capacity = d.isDegenerate() ? 0.0 : discreteInputMI(d, spec);
  s.kktResidual = fromNats(sol.kktResidual, spec.logBase);
  s.lagrange = fromNats(sol.multiplier, spec.logBase);
  s.budgetUsed = sol.costUsed;
  return s;
}

inline SleepSolution asleep(const ChannelSpec& spec) {
  SleepSolution s;
  s.logBase = spec.logBase;
  return s;
}

}  // namespace detail

/// Best wake law for a fixed sleep probability p: second moment of the wake
/// law at most beta_p = E[Y]/(1-p) - alpha.
[[nodiscard]] inline SleepSolution wakeCapacityAtP(double p, double meanHarvest, double alpha,
                                                   const ChannelSpec& spec) {
  spec.validate();
  if (!(p >= 0.0 && p < 1.0)) fail("wakeCapacityAtP: p must lie in [0, 1), got ", p);
  if (!(alpha >= 0.0)) fail("wakeCapacityAtP: alpha must be >= 0, got ", alpha);
  if (!(meanHarvest >= 0.0)) fail("wakeCapacityAtP: meanHarvest must be >= 0, got ", meanHarvest);
  const double betaP = meanHarvest / (1.0 - p) - alpha;
  if (!(betaP > 0.0)) {
    SleepSolution s = detail::asleep(spec);
    s.sleepProb = p;
    return s;
  }
  detail::InputProblem prob;
  prob.noiseVar = spec.noiseVar;
  prob.alpha = alpha;
  prob.budget = meanHarvest;
  prob.zeroMass = p;
  detail::InputOptimizer opt(prob);
  SleepSolution s = detail::toSleepSolution(opt.solve(), spec);
  s.sleepProb = p;
  return s;
}

/// Capacity under E[b(X)] <= E[Y]; the sleep probability is the optimal
/// law's mass at 0, found jointly with the wake law.
[[nodiscard]] inline SleepSolution sleepWakeCapacity(double meanHarvest, double alpha, const ChannelSpec& spec) {
  spec.validate();
  if (!(meanHarvest >= 0.0)) fail("sleepWakeCapacity: meanHarvest must be >= 0, got ", meanHarvest);
  if (!(alpha >= 0.0)) fail("sleepWakeCapacity: alpha must be >= 0, got ", alpha);
  if (meanHarvest == 0.0) return detail::asleep(spec);
  detail::InputProblem prob;
  prob.noiseVar = spec.noiseVar;
  prob.alpha = alpha;
  prob.budget = meanHarvest;
  detail::InputOptimizer opt(prob);
  return detail::toSleepSolution(opt.solve(), spec);
}

struct OnOffParts {
  double total = 0.0;      // I(X; W)
  double onOffPart = 0.0;  // I(B; W), B the wake indicator
  double gaussPart = 0.0;  // (1 - p) I(G; G + N)
};

/// Chain-rule split of I(X; W) for X = B G, each term from its own entropy
/// integrals.
[[nodiscard]] inline OnOffParts onOffDecomposition(double p, const DiscreteDist& wakeDist, const ChannelSpec& spec) {
  spec.validate();
  if (!(p >= 0.0 && p <= 1.0)) fail("onOffDecomposition: p must lie in [0, 1], got ", p);
  if (wakeDist.find(0.0)) fail("onOffDecomposition: wake law has mass at 0, so B is not determined by X");
  std::vector<std::pair<double, double>> pairs;
  if (p > 0.0) pairs.emplace_back(0.0, p);
  for (std::size_t i = 0; i < wakeDist.size(); ++i) pairs.emplace_back(wakeDist.point(i), (1.0 - p) * wakeDist.prob(i));
  const DiscreteDist x = DiscreteDist::fromPairs(std::move(pairs));

  OnOffParts r;
  r.total = discreteInputMI(x, spec);
  const double hN = fromNats(spec.noiseEntropyNats(), spec.logBase);
  const double hW = mixtureOutputEntropy(x, spec);
  const double hG = mixtureOutputEntropy(wakeDist, spec);
  r.onOffPart = std::max(0.0, hW - p * hN - (1.0 - p) * hG);
  r.gaussPart = (1.0 - p) * std::max(0.0, hG - hN);
  return r;
}

struct GaussianWake {
  double total = 0.0;      // I(X; W) with a Gaussian wake law
  double gaussPart = 0.0;  // (1 - p) * 0.5 log(1 + beta_p / sigma^2)
};

/// Sleep with probability p, otherwise send N(0, beta_p).
[[nodiscard]] inline GaussianWake gaussianWakeRate(double p, double meanHarvest, double alpha,
                                                   const ChannelSpec& spec) {
  spec.validate();
  if (!(p >= 0.0 && p < 1.0)) fail("gaussianWakeRate: p must lie in [0, 1), got ", p);
  const double betaP = meanHarvest / (1.0 - p) - alpha;
  GaussianWake r;
  if (!(betaP > 0.0)) return r;
  r.gaussPart = fromNats((1.0 - p) * halfLog1p(betaP / spec.noiseVar), spec.logBase);
  if (p == 0.0) {
    r.total = r.gaussPart;
    return r;
  }
  const double v0 = spec.noiseVar, v1 = spec.noiseVar + betaP;
  auto logf = [&](double w) {
    const double a = std::log(p) - 0.5 * std::log(2.0 * std::numbers::pi * v0) - w * w / (2.0 * v0);
    const double b = std::log1p(-p) - 0.5 * std::log(2.0 * std::numbers::pi * v1) - w * w / (2.0 * v1);
    const double m = std::max(a, b);
    return m + std::log(std::exp(a - m) + std::exp(b - m));
  };
  auto integrand = [&](double w) {
    const double l = logf(w);
    return -std::exp(l) * l;
  };
  // Narrow sleep component near 0, wide wake component outside; the density
  // is even, so integrate one side twice.
  const double inner = 12.0 * std::sqrt(v0), outer = std::max(inner, 12.0 * std::sqrt(v1));
  const double hW = 2.0 * (integrate(integrand, 0.0, inner, std::sqrt(v0), 1e-12) +
                           integrate(integrand, inner, outer, std::max(std::sqrt(v0), 0.25 * std::sqrt(v1)), 1e-12));
  r.total = fromNats(std::max(0.0, hW - spec.noiseEntropyNats()), spec.logBase);
  return r;
}

struct GaussianWakeBest {
  double pStar = 0.0;
  double rate = 0.0;
};

namespace detail {

// Maximizes f over p in [lo, hi): 101-point grid, then golden section on the
// bracket around the best grid point.
template <typename F>
GaussianWakeBest maximizeOverP(F&& f, double lo, double hi) {
  const int n = 101;
  const double top = hi - 1e-9;
  GaussianWakeBest best{lo, f(lo)};
  int bi = 0;
  for (int i = 1; i < n; ++i) {
    const double p = lo + (top - lo) * i / (n - 1);
    const double v = f(p);
    if (v > best.rate) {
      best = {p, v};
      bi = i;
    }
  }
  double a = lo + (top - lo) * std::max(0, bi - 1) / (n - 1);
  double b = lo + (top - lo) * std::min(n - 1, bi + 1) / (n - 1);
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = b - g * (b - a), d = a + g * (b - a);
  double fc = f(c), fd = f(d);
  for (int it = 0; it < 60 && b - a > 1e-10; ++it) {
    if (fc > fd) {
      b = d, d = c, fd = fc;
      c = b - g * (b - a), fc = f(c);
    } else {
      a = c, c = d, fc = fd;
      d = a + g * (b - a), fd = f(d);
    }
  }
  for (auto [p, v] : {std::pair{c, fc}, std::pair{d, fd}})
    if (v > best.rate) best = {p, v};
  return best;
}

inline double minWakeP(double meanHarvest, double alpha) {
  return alpha > meanHarvest ? 1.0 - meanHarvest / alpha : 0.0;
}

}  // namespace detail

/// max over p of the Gaussian-wake mixture rate.
[[nodiscard]] inline GaussianWakeBest bestGaussianWake(double meanHarvest, double alpha, const ChannelSpec& spec) {
  if (meanHarvest <= 0.0) return {1.0, 0.0};
  return detail::maximizeOverP([&](double p) { return gaussianWakeRate(p, meanHarvest, alpha, spec).total; },
                               detail::minWakeP(meanHarvest, alpha), 1.0);
}

/// Bursty Gaussian signalling without the ON-OFF code: max over the duty
/// cycle 1 - p of (1 - p) 0.5 log(1 + beta_p / sigma^2).
[[nodiscard]] inline GaussianWakeBest medaBaseline(double meanHarvest, double alpha, const ChannelSpec& spec) {
  if (meanHarvest <= 0.0) return {1.0, 0.0};
  auto rate = [&](double p) {
    const double betaP = meanHarvest / (1.0 - p) - alpha;
    return betaP > 0.0 ? fromNats((1.0 - p) * halfLog1p(betaP / spec.noiseVar), spec.logBase) : 0.0;
  };
  return detail::maximizeOverP(rate, detail::minWakeP(meanHarvest, alpha), 1.0);
}

struct FadingSleepWake {
  std::map<double, double> alloc;          // fade -> per-state budget P(h)
  std::map<double, SleepSolution> states;  // fade -> optimal law at noise sigma^2/h^2
  double capacity = 0.0;
  double multiplier = 0.0;  // logBase units per unit budget
  double budgetResidual = 0.0;
};

/// sup over per-state budgets with E_H[P(H)] <= E[Y] of E_H[C_h(P(H))].
/// Solved through the dual: for a price nu each state maximizes
/// I - nu E[b(X)] at noise sigma^2/h^2, and nu is searched so the expected
/// spend meets the budget. The per-state capacities are concave in the
/// budget, so the dual is exact.
[[nodiscard]] inline FadingSleepWake fadingSleepWakeCapacity(const DiscreteDist& fades, double meanHarvest,
                                                             double alpha, const ChannelSpec& spec) {
  spec.validate();
  if (fades.minPoint() < 0.0) fail("fadingSleepWakeCapacity: fade gains must be >= 0");
  if (!(meanHarvest >= 0.0)) fail("fadingSleepWakeCapacity: meanHarvest must be >= 0");
  FadingSleepWake out;
  std::vector<std::size_t> live;
  for (std::size_t i = 0; i < fades.size(); ++i) {
    out.alloc[fades.point(i)] = 0.0;
    out.states[fades.point(i)] = detail::asleep(spec);
    if (fades.point(i) > 0.0 && fades.prob(i) > 0.0) live.push_back(i);
  }
  if (live.empty() || meanHarvest == 0.0) return out;
  if (live.size() == 1 && fades.prob(live.front()) > 1.0 - 1e-12) {
    const double h = fades.point(live.front());
    const SleepSolution s = sleepWakeCapacity(meanHarvest, alpha, spec.withNoise(spec.noiseVar / (h * h)));
    out.alloc[h] = meanHarvest;
    out.states[h] = s;
    out.capacity = fades.prob(live.front()) * s.capacity;
    out.multiplier = s.lagrange;
    out.budgetResidual = std::abs(s.budgetUsed - meanHarvest);
    return out;
  }

  const std::size_t n = live.size();
  std::vector<std::optional<DiscreteDist>> warm(n);
  std::vector<detail::InputSolution> sols(n);
  auto spendAt = [&](double nu) {
    parallelFor(n, [&](std::size_t k) {
      const double h = fades.point(live[k]);
      detail::InputProblem prob;
      prob.noiseVar = spec.noiseVar / (h * h);
      prob.alpha = alpha;
      // Only sizes the domain: no state can spend more than E[Y]/P(h).
      prob.budget = meanHarvest / fades.prob(live[k]);
      detail::InputOptimizer opt(prob);
      sols[k] = opt.solveDual(nu, warm[k]);
      warm[k] = sols[k].dist;
    });
    double s = 0.0;
    for (std::size_t k = 0; k < n; ++k) s += fades.prob(live[k]) * sols[k].costUsed;
    return s;
  };

  // Spend is nonincreasing in nu. Bracket, then regula falsi (Illinois).
  double hiNu = 0.25 / spec.noiseVar, loNu = hiNu;
  double fHi = spendAt(hiNu) - meanHarvest;
  double fLo = fHi;
  std::vector<detail::InputSolution> loSols = sols, hiSols = sols;
  if (fHi > 0.0) {
    while (fHi > 0.0) {
      loNu = hiNu, fLo = fHi, loSols = sols;
      hiNu *= 2.0;
      fHi = spendAt(hiNu) - meanHarvest;
    }
    hiSols = sols;
  } else {
    while (fLo <= 0.0) {
      hiNu = loNu, fHi = fLo, hiSols = sols;
      loNu *= 0.5;
      fLo = spendAt(loNu) - meanHarvest;
      if (loNu < 1e-12) break;
    }
    loSols = sols;
  }
  int side = 0;
  for (int it = 0; it < 100 && fLo > 0.0; ++it) {
    double nu = (loNu * fHi - hiNu * fLo) / (fHi - fLo);
    if (!(nu > loNu && nu < hiNu)) nu = 0.5 * (loNu + hiNu);
    const double f = spendAt(nu) - meanHarvest;
    if (f > 0.0) {
      loNu = nu, fLo = f, loSols = sols;
      if (side == -1) fHi *= 0.5;
      side = -1;
    } else {
      hiNu = nu, fHi = f, hiSols = sols;
      if (side == 1) fLo *= 0.5;
      side = 1;
    }
    if (std::abs(fHi) <= 1e-9 * std::max(1.0, meanHarvest) || hiNu - loNu <= 1e-13 * hiNu) break;
  }

  // Report the feasible side of the bracket.
  double spend = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double h = fades.point(live[k]);
    const ChannelSpec eff = spec.withNoise(spec.noiseVar / (h * h));
    SleepSolution s = detail::toSleepSolution(hiSols[k], eff);
    out.alloc[h] = hiSols[k].costUsed;
    out.states[h] = s;
    out.capacity += fades.prob(live[k]) * s.capacity;
    spend += fades.prob(live[k]) * hiSols[k].costUsed;
  }
  out.multiplier = fromNats(hiNu, spec.logBase);
  out.budgetResidual = std::abs(spend - meanHarvest);
  return out;
}

struct SleepCurveRow {
  double meanHarvest = 0.0;
  double pStar = 0.0;
  double capacity = 0.0;
  double gaussianWake = 0.0;
  double noSleep = 0.0;
  double medaBaseline = 0.0;
  double kktResidual = 0.0;
};

/// One row per harvest mean; rows are independent and computed in parallel.
[[nodiscard]] inline std::vector<SleepCurveRow> sleepWakeCurve(const std::vector<double>& meanHarvests, double alpha,
                                                               const ChannelSpec& spec) {
  std::vector<SleepCurveRow> rows(meanHarvests.size());
  parallelFor(rows.size(), [&](std::size_t i) {
    const double e = meanHarvests[i];
    const SleepSolution s = sleepWakeCapacity(e, alpha, spec);
    rows[i] = {e,
               s.sleepProb,
               s.capacity,
               bestGaussianWake(e, alpha, spec).rate,
               processorEnergyRate(e, alpha, 0.0, spec).rate,
               medaBaseline(e, alpha, spec).rate,
               s.kktResidual};
  });
  return rows;
}

}  // namespace ehcap
