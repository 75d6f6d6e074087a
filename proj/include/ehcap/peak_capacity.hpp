#pragma once

// Amplitude-constrained AWGN capacity and the harvest-use (no buffer) rates
// built on it, plus the finite-alphabet capacity with partial harvest
// knowledge at encoder and decoder.

#include <cmath>
#include <map>
#include <optional>
#include <vector>

#include "ehcap/capacity_ideal.hpp"
#include "ehcap/core.hpp"
#include "ehcap/detail/blahut.hpp"
#include "ehcap/detail/input_optimizer.hpp"
#include "ehcap/parallel.hpp"

namespace ehcap {

struct PeakSolution {
  DiscreteDist dist;
  double capacity = 0.0;  // spec.logBase units
  double kktResidual = 0.0;
  double supportResidual = 0.0;
  std::optional<double> lagrangeAvg;
  LogBase logBase = LogBase::bits;
};

inline void to_json(nlohmann::json& j, const PeakSolution& s) {
  j = nlohmann::json{{"support", s.dist},
                     {"capacity", s.capacity},
                     {"kktResidual", s.kktResidual},
                     {"supportResidual", s.supportResidual},
                     {"logBase", toString(s.logBase)}};
  j["lagrangeAvg"] = s.lagrangeAvg ? nlohmann::json(*s.lagrangeAvg) : nlohmann::json(nullptr);
}

/// Capacity under |X| <= sqrt(peakPower), optionally also E[X^2] <= avgPower.
/// Residuals are in spec.logBase units.
[[nodiscard]] inline PeakSolution peakCapacity(double peakPower, const ChannelSpec& spec,
                                               std::optional<double> avgPower = std::nullopt) {
  spec.validate();
  if (!(peakPower >= 0.0)) fail("peakCapacity: peakPower must be >= 0, got ", peakPower);
  PeakSolution s;
  s.logBase = spec.logBase;
  if (peakPower == 0.0) return s;

  detail::InputProblem prob;
  prob.noiseVar = spec.noiseVar;
  prob.peak = std::sqrt(peakPower);
  if (avgPower) {
    if (!(*avgPower >= 0.0)) fail("peakCapacity: avgPower must be >= 0, got ", *avgPower);
    prob.budget = *avgPower;
  }
  detail::InputOptimizer opt(prob);
  const detail::InputSolution sol = opt.solve();
  s.dist = sol.dist;
  s.capacity = discreteInputMI(sol.dist, spec);
  s.kktResidual = fromNats(sol.kktResidual, spec.logBase);
  s.supportResidual = fromNats(sol.supportResidual, spec.logBase);
  if (sol.constraintActive) s.lagrangeAvg = fromNats(sol.multiplier, spec.logBase);
  return s;
}

/// y - E[log cosh(y - sqrt(y) G)], G standard normal; nats converted to
/// spec.logBase. Stated valid for sqrt(y) < 1.05.
[[nodiscard]] inline double closedFormPeak(double peakPower, const ChannelSpec& spec) {
  if (!(peakPower >= 0.0)) fail("closedFormPeak: peakPower must be >= 0, got ", peakPower);
  if (std::sqrt(peakPower) >= 1.05)
    warn("closedFormPeak: sqrt(y) = ", std::sqrt(peakPower), " is outside the validity range sqrt(y) < 1.05");
  if (peakPower == 0.0) return 0.0;
  const double y = peakPower;
  auto logCosh = [](double t) {
    const double a = std::abs(t);
    return a + std::log1p(std::exp(-2.0 * a)) - std::numbers::ln2;
  };
  auto f = [&](double x) {
    return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi) * logCosh(y - std::sqrt(y) * x);
  };
  const double c = y - integrate(f, -12.0, 12.0, 0.25, 1e-14);
  return fromNats(std::max(0.0, c), spec.logBase);
}

namespace detail {

inline void checkHarvest(const DiscreteDist& harvest, const char* who) {
  if (harvest.minPoint() < 0.0) fail(who, ": harvest points must be >= 0, got ", harvest.minPoint());
}

}  // namespace detail

/// E_Y[C_peak(Y)]: no buffer, harvest known at both ends.
[[nodiscard]] inline RateResult huCapacity(const DiscreteDist& harvest, const ChannelSpec& spec) {
  spec.validate();
  detail::checkHarvest(harvest, "huCapacity");
  std::vector<double> caps(harvest.size(), 0.0), kkt(harvest.size(), 0.0);
  parallelFor(harvest.size(), [&](std::size_t i) {
    const PeakSolution s = peakCapacity(harvest.point(i), spec);
    caps[i] = s.capacity;
    kkt[i] = s.kktResidual;
  });
  RateResult r{0.0, Method::optimized, spec.logBase, {}};
  for (std::size_t i = 0; i < harvest.size(); ++i) r.rate += harvest.prob(i) * caps[i];
  r.meta["maxKktResidual"] = *std::max_element(kkt.begin(), kkt.end());
  return r;
}

/// No-buffer rate over fading. With CSIT the input in state (y, h) is the
/// peak-y optimum at noise sigma^2/h^2; without it the peak-y optimum at
/// noise sigma^2 is sent and its information is averaged over h.
[[nodiscard]] inline RateResult huFadingCapacity(const DiscreteDist& harvest, const DiscreteDist& fades, bool csit,
                                                 const ChannelSpec& spec) {
  spec.validate();
  detail::checkHarvest(harvest, "huFadingCapacity");
  if (fades.minPoint() < 0.0) fail("huFadingCapacity: fade gains must be >= 0");
  const std::size_t ny = harvest.size(), nh = fades.size();
  std::vector<double> cell(ny * nh, 0.0);
  if (csit) {
    parallelFor(ny * nh, [&](std::size_t k) {
      const double y = harvest.point(k / nh), h = fades.point(k % nh);
      if (h <= 0.0 || y <= 0.0) return;
      cell[k] = peakCapacity(y, spec.withNoise(spec.noiseVar / (h * h))).capacity;
    });
  } else {
    parallelFor(ny, [&](std::size_t i) {
      const double y = harvest.point(i);
      if (y <= 0.0) return;
      const DiscreteDist x = peakCapacity(y, spec).dist;
      for (std::size_t j = 0; j < nh; ++j) {
        const double h = fades.point(j);
        cell[i * nh + j] = h > 0.0 ? discreteInputMI(x.scaled(h), spec) : 0.0;
      }
    });
  }
  RateResult r{0.0, Method::optimized, spec.logBase, {}};
  for (std::size_t i = 0; i < ny; ++i)
    for (std::size_t j = 0; j < nh; ++j) r.rate += harvest.prob(i) * fades.prob(j) * cell[i * nh + j];
  return r;
}

/// Capacity restricted to a finite amplitude set, by Blahut-Arimoto.
[[nodiscard]] inline PeakSolution gridPeakCapacity(const std::vector<double>& amplitudes, const ChannelSpec& spec,
                                                   double tolNats = 1e-9) {
  spec.validate();
  if (amplitudes.empty()) fail("gridPeakCapacity: empty amplitude grid");
  std::vector<double> grid = amplitudes;
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  PeakSolution s;
  s.logBase = spec.logBase;
  if (grid.size() == 1) {
    s.dist = DiscreteDist::pointMass(grid.front());
    return s;
  }
  const detail::BlahutResult br = detail::gridCapacity(grid, spec.noiseVar, tolNats);
  std::vector<std::pair<double, double>> pairs;
  for (std::size_t j = 0; j < grid.size(); ++j) pairs.emplace_back(grid[j], br.q[j]);
  s.dist = DiscreteDist::fromPairs(std::move(pairs));
  s.capacity = fromNats(br.miNats, spec.logBase);
  s.kktResidual = fromNats(br.gapNats, spec.logBase);
  return s;
}

/// Stochastic matrix rows[i][v] = P(V = v | Y = y_i).
using ObsChannel = std::vector<std::vector<double>>;

struct PartialInfoResult {
  RateResult rate;
  std::vector<std::vector<double>> strategies;  // amplitude per encoder observation
  std::vector<double> strategyProbs;
  double gap = 0.0;  // duality gap, logBase units
};

/// sup over laws on strategies t: V_t -> inputGrid of I(T; W | V_r), where a
/// strategy is feasible when t(v)^2 <= y for every harvest y that can produce
/// encoder observation v.
[[nodiscard]] inline PartialInfoResult partialInfoCapacity(const DiscreteDist& harvest, const ObsChannel& encObs,
                                                           const ObsChannel& decObs,
                                                           const std::vector<double>& inputGrid,
                                                           const ChannelSpec& spec, double tolNats = 1e-8) {
  spec.validate();
  detail::checkHarvest(harvest, "partialInfoCapacity");
  const std::size_t ny = harvest.size();
  auto checkChannel = [&](const ObsChannel& ch, const char* name) {
    if (ch.size() != ny) fail("partialInfoCapacity: ", name, " needs one row per harvest point");
    for (std::size_t i = 0; i < ny; ++i) {
      if (ch[i].size() != ch.front().size() || ch[i].empty())
        fail("partialInfoCapacity: ", name, " rows must share a nonempty alphabet");
      double s = 0.0;
      for (double p : ch[i]) {
        if (!(p >= 0.0)) fail("partialInfoCapacity: ", name, " has a negative entry in row ", i);
        s += p;
      }
      if (std::abs(s - 1.0) > 1e-9) fail("partialInfoCapacity: ", name, " row ", i, " sums to ", s);
    }
  };
  checkChannel(encObs, "encObs");
  checkChannel(decObs, "decObs");
  if (inputGrid.empty()) fail("partialInfoCapacity: empty input grid");
  const std::size_t nvt = encObs.front().size(), nvr = decObs.front().size(), ng = inputGrid.size();

  // Largest admissible energy per encoder observation.
  std::vector<double> cap(nvt, std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < ny; ++i)
    for (std::size_t v = 0; v < nvt; ++v)
      if (harvest.prob(i) > 0.0 && encObs[i][v] > 0.0) cap[v] = std::min(cap[v], harvest.point(i));
  std::vector<std::vector<std::size_t>> allowed(nvt);
  for (std::size_t v = 0; v < nvt; ++v)
    for (std::size_t j = 0; j < ng; ++j)
      if (inputGrid[j] * inputGrid[j] <= cap[v] + 1e-12) allowed[v].push_back(j);
  for (std::size_t v = 0; v < nvt; ++v)
    if (allowed[v].empty()) fail("partialInfoCapacity: no feasible strategy (encoder observation ", v, ")");

  // Enumerate strategies as mixed-radix counters over the allowed amplitudes.
  std::vector<std::vector<std::size_t>> strat;
  std::vector<std::size_t> idx(nvt, 0);
  for (;;) {
    std::vector<std::size_t> s(nvt);
    for (std::size_t v = 0; v < nvt; ++v) s[v] = allowed[v][idx[v]];
    strat.push_back(std::move(s));
    if (strat.size() > 200000) fail("partialInfoCapacity: strategy alphabet too large");
    std::size_t v = 0;
    while (v < nvt && ++idx[v] == allowed[v].size()) idx[v++] = 0;
    if (v == nvt) break;
  }

  std::vector<std::vector<std::vector<double>>> letters(strat.size(),
                                                        std::vector<std::vector<double>>(nvr, std::vector<double>(ng, 0.0)));
  for (std::size_t t = 0; t < strat.size(); ++t)
    for (std::size_t i = 0; i < ny; ++i)
      for (std::size_t vr = 0; vr < nvr; ++vr)
        for (std::size_t vt = 0; vt < nvt; ++vt)
          letters[t][vr][strat[t][vt]] += harvest.prob(i) * decObs[i][vr] * encObs[i][vt];

  const detail::BlahutResult br = detail::BlahutSolver(inputGrid, std::move(letters), spec.noiseVar).solve(tolNats);
  PartialInfoResult out;
  out.rate = {fromNats(br.miNats, spec.logBase), Method::optimized, spec.logBase, {}};
  out.gap = fromNats(br.gapNats, spec.logBase);
  out.rate.meta["dualityGap"] = out.gap;
  out.rate.meta["strategies"] = static_cast<double>(strat.size());
  for (std::size_t t = 0; t < strat.size(); ++t) {
    std::vector<double> amp(nvt);
    for (std::size_t v = 0; v < nvt; ++v) amp[v] = inputGrid[strat[t][v]];
    out.strategies.push_back(std::move(amp));
  }
  out.strategyProbs = br.q;
  return out;
}

}  // namespace ehcap
