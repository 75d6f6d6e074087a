#pragma once

// Finite energy buffer with a one-step Markov policy T_k = h(E_k). Energies
// live on an integer grid: the stored energy min(E - X^2, Gamma) is rounded
// to a neighbouring integer at random with its mean preserved, then the next
// harvest is added. Inputs in state E come from the capacity-optimal law on an
// L-point uniform grid over [-sqrt(h(E)), sqrt(h(E))].
//
// Rates are information rates of the resulting finite-state source, estimated
// on a simulated trajectory with the forward (sum-product) recursion.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <mutex>
#include <numbers>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "ehcap/capacity_ideal.hpp"
#include "ehcap/core.hpp"
#include "ehcap/parallel.hpp"
#include "ehcap/peak_capacity.hpp"
#include "ehcap/sim.hpp"

namespace ehcap {

struct FiniteBufferSpec {
  int gamma = 15;
  DiscreteDist harvest = DiscreteDist::pointMass(0.0);  // integer energy units
  int inputLevels = 15;

  void validate() const {
    if (gamma < 0) fail("FiniteBufferSpec: gamma must be >= 0, got ", gamma);
    for (double y : harvest.points())
      if (y < 0.0 || std::abs(y - std::round(y)) > 1e-9)
        fail("FiniteBufferSpec: harvest points must be nonnegative integers, got ", y);
    if (inputLevels < 3 || inputLevels % 2 == 0)
      fail("FiniteBufferSpec: inputLevels must be odd and >= 3, got ", inputLevels);
  }

  [[nodiscard]] int maxHarvest() const { return static_cast<int>(std::lround(harvest.maxPoint())); }
  /// Largest available energy: a full buffer plus the largest harvest.
  [[nodiscard]] int maxState() const { return gamma + maxHarvest(); }
};

struct MarkovPolicy {
  std::vector<double> h;         // indexed by available energy 0..maxState
  std::vector<DiscreteDist> law;  // amplitudes with x^2 <= h[E]
};

namespace detail {

struct QuantLaw {
  DiscreteDist dist;
  double miNats = 0.0;
};

// Grid-optimal laws are deterministic in (noise, T, L), so one process-wide
// cache serves every policy and thread.
class LawCache {
public:
  QuantLaw get(double t, int levels, double noiseVar) {
    const auto key = std::make_tuple(noiseVar, t, levels);
    {
      std::lock_guard lock(mu_);
      if (auto it = cache_.find(key); it != cache_.end()) return it->second;
    }
    QuantLaw q;
    if (t > 0.0) {
      const int half = levels / 2;
      std::vector<double> grid;
      for (int j = -half; j <= half; ++j) grid.push_back(std::sqrt(t) * j / half);
      ChannelSpec ch;
      ch.noiseVar = noiseVar;
      ch.logBase = LogBase::nats;
      const PeakSolution s = gridPeakCapacity(grid, ch);
      q = {s.dist, s.capacity};
    }
    std::lock_guard lock(mu_);
    return cache_.emplace(key, std::move(q)).first->second;
  }

private:
  std::mutex mu_;
  std::map<std::tuple<double, double, int>, QuantLaw> cache_;
};

inline LawCache& lawCache() {
  static LawCache c;
  return c;
}

}  // namespace detail

/// Policy with the given per-state transmit energies and grid-optimal laws.
[[nodiscard]] inline MarkovPolicy makePolicy(const FiniteBufferSpec& spec, const ChannelSpec& channel,
                                             std::vector<double> h) {
  spec.validate();
  channel.validate();
  if (h.size() != static_cast<std::size_t>(spec.maxState() + 1))
    fail("makePolicy: need ", spec.maxState() + 1, " transmit energies, got ", h.size());
  MarkovPolicy p;
  p.h = std::move(h);
  for (double t : p.h) p.law.push_back(detail::lawCache().get(t, spec.inputLevels, channel.noiseVar).dist);
  return p;
}

/// Spend everything available, with the peak-optimal quantized law.
[[nodiscard]] inline MarkovPolicy greedyPolicy(const FiniteBufferSpec& spec, const ChannelSpec& channel) {
  std::vector<double> h(spec.maxState() + 1);
  for (std::size_t e = 0; e < h.size(); ++e) h[e] = static_cast<double>(e);
  return makePolicy(spec, channel, std::move(h));
}

/// h(E) = min(E, target).
[[nodiscard]] inline MarkovPolicy constantPolicy(const FiniteBufferSpec& spec, const ChannelSpec& channel,
                                                 double target) {
  if (!(target >= 0.0)) fail("constantPolicy: target must be >= 0");
  std::vector<double> h(spec.maxState() + 1);
  for (std::size_t e = 0; e < h.size(); ++e) h[e] = std::min(static_cast<double>(e), target);
  return makePolicy(spec, channel, std::move(h));
}

/// h(E) = theta[E] E; theta[0] is ignored.
[[nodiscard]] inline MarkovPolicy fractionPolicy(const FiniteBufferSpec& spec, const ChannelSpec& channel,
                                                 const std::vector<double>& theta) {
  std::vector<double> h(spec.maxState() + 1, 0.0);
  if (theta.size() != h.size()) fail("fractionPolicy: need ", h.size(), " fractions, got ", theta.size());
  for (std::size_t e = 1; e < h.size(); ++e) {
    if (!(theta[e] >= 0.0 && theta[e] <= 1.0)) fail("fractionPolicy: fraction for E=", e, " outside [0, 1]");
    h[e] = theta[e] * static_cast<double>(e);
  }
  return makePolicy(spec, channel, std::move(h));
}

[[nodiscard]] inline std::vector<double> fractionsOf(const MarkovPolicy& p) {
  std::vector<double> th(p.h.size(), 0.0);
  for (std::size_t e = 1; e < p.h.size(); ++e) th[e] = std::clamp(p.h[e] / static_cast<double>(e), 0.0, 1.0);
  return th;
}

struct Transition {
  int to;
  double prob;
};

struct MarkovChain {
  // Per state E and input index j: where the chain goes next.
  std::vector<std::vector<std::vector<Transition>>> kernel;
  std::vector<int> states;        // reachable from an empty buffer, ascending
  std::vector<double> matrix;     // dense P over `states`, row-major
  std::vector<double> stationary; // over `states`
  bool irreducible = true;
  double maxRowError = 0.0;
};

namespace detail {

inline void checkPolicy(const FiniteBufferSpec& spec, const MarkovPolicy& p) {
  const std::size_t n = static_cast<std::size_t>(spec.maxState() + 1);
  if (p.h.size() != n || p.law.size() != n) fail("policy covers ", p.h.size(), " states, need ", n);
  for (std::size_t e = 0; e < n; ++e) {
    const double ee = static_cast<double>(e);
    if (!(p.h[e] >= 0.0) || p.h[e] > ee * (1.0 + 1e-12) + 1e-12)
      fail("infeasible policy at state E=", e, ": h(E)=", p.h[e], " exceeds E");
    for (std::size_t j = 0; j < p.law[e].size(); ++j) {
      const double x = p.law[e].point(j);
      if (p.law[e].prob(j) > 0.0 && x * x > p.h[e] * (1.0 + 1e-9) + 1e-12)
        fail("infeasible policy at state E=", e, ": input ", x, " has x^2 above h(E)=", p.h[e]);
    }
  }
}

}  // namespace detail

[[nodiscard]] inline MarkovChain buildChain(const FiniteBufferSpec& spec, const MarkovPolicy& policy) {
  spec.validate();
  detail::checkPolicy(spec, policy);
  const int n = spec.maxState() + 1;
  MarkovChain c;
  c.kernel.resize(n);
  for (int e = 0; e < n; ++e) {
    const DiscreteDist& law = policy.law[e];
    for (std::size_t j = 0; j < law.size(); ++j) {
      const double x = law.point(j);
      const double stored = std::clamp(static_cast<double>(e) - x * x, 0.0, static_cast<double>(spec.gamma));
      const double fl = std::floor(stored);
      const double frac = stored - fl;
      std::map<int, double> next;
      for (std::size_t i = 0; i < spec.harvest.size(); ++i) {
        const int y = static_cast<int>(std::lround(spec.harvest.point(i)));
        const double py = spec.harvest.prob(i);
        if (py <= 0.0) continue;
        next[static_cast<int>(fl) + y] += (1.0 - frac) * py;
        if (frac > 0.0) next[static_cast<int>(fl) + 1 + y] += frac * py;
      }
      std::vector<Transition> tr;
      for (const auto& [to, p] : next)
        if (p > 0.0) tr.push_back({to, p});
      c.kernel[e].push_back(std::move(tr));
    }
  }

  // Reachable set from an empty buffer: E_0 = Y_0.
  std::vector<char> seen(n, 0);
  std::vector<int> stack;
  for (std::size_t i = 0; i < spec.harvest.size(); ++i)
    if (spec.harvest.prob(i) > 0.0) {
      const int y = static_cast<int>(std::lround(spec.harvest.point(i)));
      if (!seen[y]) stack.push_back(y), seen[y] = 1;
    }
  while (!stack.empty()) {
    const int e = stack.back();
    stack.pop_back();
    for (std::size_t j = 0; j < c.kernel[e].size(); ++j) {
      if (policy.law[e].prob(j) <= 0.0) continue;
      for (const auto& t : c.kernel[e][j])
        if (!seen[t.to]) stack.push_back(t.to), seen[t.to] = 1;
    }
  }
  std::vector<int> index(n, -1);
  for (int e = 0; e < n; ++e)
    if (seen[e]) index[e] = static_cast<int>(c.states.size()), c.states.push_back(e);
  const std::size_t m = c.states.size();
  c.matrix.assign(m * m, 0.0);
  for (std::size_t a = 0; a < m; ++a) {
    const int e = c.states[a];
    for (std::size_t j = 0; j < c.kernel[e].size(); ++j)
      for (const auto& t : c.kernel[e][j]) c.matrix[a * m + index[t.to]] += policy.law[e].prob(j) * t.prob;
    double row = 0.0;
    for (std::size_t b = 0; b < m; ++b) row += c.matrix[a * m + b];
    c.maxRowError = std::max(c.maxRowError, std::abs(row - 1.0));
    if (std::abs(row - 1.0) > 1e-12) fail("buildChain: row for state E=", e, " sums to ", row);
  }

  // Irreducible when every reachable state reaches every other.
  std::vector<char> reach(m * m, 0);
  for (std::size_t a = 0; a < m; ++a) {
    reach[a * m + a] = 1;
    for (std::size_t b = 0; b < m; ++b)
      if (c.matrix[a * m + b] > 0.0) reach[a * m + b] = 1;
  }
  for (std::size_t k = 0; k < m; ++k)
    for (std::size_t a = 0; a < m; ++a)
      if (reach[a * m + k])
        for (std::size_t b = 0; b < m; ++b)
          if (reach[k * m + b]) reach[a * m + b] = 1;
  c.irreducible = std::all_of(reach.begin(), reach.end(), [](char r) { return r != 0; });

  // Power iteration on the lazy chain (P + I) / 2, which shares the
  // stationary law and is aperiodic.
  std::vector<double> pi(m, 1.0 / m), nx(m);
  for (int it = 0; it < 200000; ++it) {
    for (std::size_t b = 0; b < m; ++b) nx[b] = 0.5 * pi[b];
    for (std::size_t a = 0; a < m; ++a)
      for (std::size_t b = 0; b < m; ++b) nx[b] += 0.5 * pi[a] * c.matrix[a * m + b];
    double diff = 0.0;
    for (std::size_t b = 0; b < m; ++b) diff += std::abs(nx[b] - pi[b]);
    pi.swap(nx);
    if (diff < 1e-15) break;
  }
  c.stationary = std::move(pi);
  return c;
}

struct InfoRateEstimate {
  double rate = 0.0;  // recursion rate, channel.logBase units
  double stdErr = 0.0;
  double conditionalRate = 0.0;  // I(X; W | E) along the trajectory
  bool irreducible = true;
  std::vector<double> occupancy;  // visit frequency per energy 0..maxState
  LogBase logBase = LogBase::bits;
};

inline void to_json(nlohmann::json& j, const InfoRateEstimate& r) {
  j = nlohmann::json{{"rate", r.rate},
                     {"stdErr", r.stdErr},
                     {"conditionalRate", r.conditionalRate},
                     {"irreducible", r.irreducible},
                     {"logBase", toString(r.logBase)}};
}

/// Information rate lim (1/n) I(X^n; W^n) from a trajectory of `length`
/// steps starting with `initialStored` energy in the buffer.
///
/// The estimate averages log f(w_k | x_k) - log p(w_k | w^{k-1}), where the
/// predictive density comes from the forward recursion over buffer states.
/// The first term has mean -h(N); using it in place of the constant cancels
/// most of the noise in the output-entropy estimate and makes single-input
/// cases exact. The standard error is a 20-block bootstrap.
[[nodiscard]] inline InfoRateEstimate infoRate(const FiniteBufferSpec& spec, const MarkovPolicy& policy,
                                               const ChannelSpec& channel, std::int64_t length, const RngStream& rng,
                                               int initialStored = 0) {
  channel.validate();
  if (length < 100000) fail("infoRate: length must be >= 10^5, got ", length);
  if (initialStored < 0 || initialStored > spec.gamma) fail("infoRate: initial energy outside [0, gamma]");
  const MarkovChain chain = buildChain(spec, policy);
  const int n = spec.maxState() + 1;
  const double s2 = channel.noiseVar, inv2s2 = 1.0 / (2.0 * s2);

  // Flattened per (state, input) data for the recursion.
  std::vector<int> first(n + 1, 0);
  std::vector<double> xs, ps, mi(n, 0.0);
  for (int e = 0; e < n; ++e) {
    first[e + 1] = first[e] + static_cast<int>(policy.law[e].size());
    for (std::size_t j = 0; j < policy.law[e].size(); ++j) {
      xs.push_back(policy.law[e].point(j));
      ps.push_back(policy.law[e].prob(j));
    }
    mi[e] = detail::lawCache().get(policy.h[e], spec.inputLevels, s2).miNats;
  }

  RngStream hs = rng.substream(detail::kHarvestStream);
  RngStream ns = rng.substream(detail::kNoiseStream);
  RngStream is = rng.substream(detail::kCodeStream);
  RngStream rs = rng.substream(6);

  InfoRateEstimate out;
  out.logBase = channel.logBase;
  out.irreducible = chain.irreducible;
  out.occupancy.assign(n, 0.0);

  std::vector<double> alpha(n, 0.0), next(n, 0.0), a(xs.size());
  int e = initialStored + static_cast<int>(std::lround(hs.sample(spec.harvest)));
  // The decoder knows the starting buffer level but not the first harvest.
  for (std::size_t i = 0; i < spec.harvest.size(); ++i)
    alpha[initialStored + static_cast<int>(std::lround(spec.harvest.point(i)))] += spec.harvest.prob(i);

  constexpr int kBlocks = 20;
  const std::int64_t burn = length / 100;
  const std::int64_t counted = length - burn;
  std::vector<double> block(kBlocks, 0.0);
  std::vector<std::int64_t> blockLen(kBlocks, 0);
  double condSum = 0.0;
  for (std::int64_t k = 0; k < length; ++k) {
    // Draw the input by inverse CDF so paired runs share uniforms.
    const DiscreteDist& law = policy.law[e];
    const double u = is.uniform();
    std::size_t jx = law.size() - 1;
    double acc = 0.0;
    for (std::size_t i = 0; i < law.size(); ++i) {
      acc += law.prob(i);
      if (u < acc) {
        jx = i;
        break;
      }
    }
    const double x = law.point(jx);
    const double w = x + std::sqrt(s2) * ns.normal();

    double total = 0.0;
    for (int s = 0; s < n; ++s) {
      if (alpha[s] <= 0.0) {
        for (int j = first[s]; j < first[s + 1]; ++j) a[j] = 0.0;
        continue;
      }
      for (int j = first[s]; j < first[s + 1]; ++j) {
        const double d = w - xs[j];
        a[j] = alpha[s] * ps[j] * std::exp(-d * d * inv2s2);
        total += a[j];
      }
    }
    const double dx = w - x;
    const double contrib = -dx * dx * inv2s2 - std::log(total);
    std::fill(next.begin(), next.end(), 0.0);
    for (int s = 0; s < n; ++s)
      for (int j = first[s]; j < first[s + 1]; ++j)
        if (a[j] > 0.0)
          for (const auto& t : chain.kernel[s][j - first[s]]) next[t.to] += a[j] * t.prob;
    double z = 0.0;
    for (double v : next) z += v;
    for (int s = 0; s < n; ++s) alpha[s] = next[s] / z;

    if (k >= burn) {
      const std::size_t b = static_cast<std::size_t>((k - burn) * kBlocks / counted);
      block[b] += contrib;
      ++blockLen[b];
      condSum += mi[e];
      out.occupancy[e] += 1.0;
    }

    // Buffer update: store, round stochastically, add the next harvest.
    const double stored = std::clamp(static_cast<double>(e) - x * x, 0.0, static_cast<double>(spec.gamma));
    const double fl = std::floor(stored);
    const int st = static_cast<int>(fl) + (rs.uniform() < stored - fl ? 1 : 0);
    e = st + static_cast<int>(std::lround(hs.sample(spec.harvest)));
  }
  for (double& o : out.occupancy) o /= static_cast<double>(counted);

  double sum = 0.0;
  std::vector<double> means(kBlocks);
  for (int b = 0; b < kBlocks; ++b) {
    sum += block[b];
    means[b] = block[b] / static_cast<double>(blockLen[b]);
  }
  const double mean = sum / static_cast<double>(counted);
  RngStream bs = rng.substream(9);
  constexpr int kResamples = 200;
  double m1 = 0.0, m2 = 0.0;
  for (int r = 0; r < kResamples; ++r) {
    double s = 0.0;
    for (int b = 0; b < kBlocks; ++b) s += means[static_cast<std::size_t>(bs.uniform() * kBlocks)];
    s /= kBlocks;
    m1 += s;
    m2 += s * s;
  }
  m1 /= kResamples;
  const double se = std::sqrt(std::max(0.0, m2 / kResamples - m1 * m1));
  out.rate = fromNats(std::max(0.0, mean), channel.logBase);
  out.stdErr = fromNats(se, channel.logBase);
  out.conditionalRate = fromNats(condSum / static_cast<double>(counted), channel.logBase);
  return out;
}

struct SpsaOptions {
  int iters = 40;
  std::int64_t length = 100000;
  double a = 0.2;
  double c = 0.1;
  std::optional<double> bigA;  // default iters / 10
};

struct SpsaResult {
  MarkovPolicy policy;
  InfoRateEstimate estimate;      // final re-evaluation of the returned policy
  InfoRateEstimate initEstimate;  // init on the same stream
  bool improved = false;
  int evaluations = 0;
};

/// Maximizes the information rate over h(E) = theta_E E by simultaneous
/// perturbation. Each iteration evaluates theta +/- c_k Delta on the same
/// random stream; the best evaluated point is kept and finally compared
/// against init on a fresh common stream.
[[nodiscard]] inline SpsaResult spsaOptimize(const FiniteBufferSpec& spec, const ChannelSpec& channel,
                                             const MarkovPolicy& init, const SpsaOptions& opt,
                                             const RngStream& rng) {
  spec.validate();
  if (opt.iters < 1) fail("spsaOptimize: iters must be >= 1");
  SpsaResult res;
  res.policy = init;
  const RngStream finalStream = rng.substream(1000003);
  if (spec.harvest.maxPoint() <= 0.0) {
    res.initEstimate = res.estimate = infoRate(spec, init, channel, opt.length, finalStream);
    return res;
  }
  const double bigA = opt.bigA.value_or(opt.iters / 10.0);
  std::vector<double> theta = fractionsOf(init);
  const std::size_t dim = theta.size();
  RngStream ds = rng.substream(1000001);

  std::vector<double> best = theta;
  double bestRate = -1.0;
  for (int k = 1; k <= opt.iters; ++k) {
    const double ak = opt.a / std::pow(k + bigA, 0.602);
    const double ck = opt.c / std::pow(static_cast<double>(k), 0.101);
    std::vector<double> delta(dim, 0.0), tp = theta, tm = theta;
    for (std::size_t i = 1; i < dim; ++i) {
      delta[i] = ds.uniform() < 0.5 ? -1.0 : 1.0;
      tp[i] = std::clamp(theta[i] + ck * delta[i], 0.0, 1.0);
      tm[i] = std::clamp(theta[i] - ck * delta[i], 0.0, 1.0);
    }
    const RngStream crn = rng.substream(static_cast<std::uint64_t>(k));
    double y[2];
    const std::vector<double>* pts[2] = {&tp, &tm};
    parallelFor(2, [&](std::size_t s) {
      y[s] = infoRate(spec, fractionPolicy(spec, channel, *pts[s]), channel, opt.length, crn).rate;
    });
    res.evaluations += 2;
    for (int s = 0; s < 2; ++s)
      if (y[s] > bestRate) bestRate = y[s], best = *pts[s];
    for (std::size_t i = 1; i < dim; ++i) {
      const double span = tp[i] - tm[i];
      if (span == 0.0) continue;
      theta[i] = std::clamp(theta[i] + ak * (y[0] - y[1]) / span, 0.0, 1.0);
    }
  }

  const MarkovPolicy cand = fractionPolicy(spec, channel, best);
  InfoRateEstimate ci, ii;
  parallelFor(2, [&](std::size_t s) {
    if (s == 0) ci = infoRate(spec, cand, channel, opt.length, finalStream);
    else ii = infoRate(spec, init, channel, opt.length, finalStream);
  });
  res.evaluations += 2;
  res.initEstimate = ii;
  if (ci.rate > ii.rate) {
    res.policy = cand;
    res.estimate = ci;
    res.improved = true;
  } else {
    res.estimate = ii;
  }
  return res;
}

struct Fig8Row {
  double meanY = 0.0;
  double noBuffer = 0.0;
  double greedy = 0.0;
  double greedySe = 0.0;
  double optimized = 0.0;
  double optimizedSe = 0.0;
  double infinite = 0.0;
  double greedyConditional = 0.0;
  double optimizedConditional = 0.0;
};

struct Fig8Options {
  std::int64_t length = 100000;
  int spsaIters = 40;
  int inputLevels = 15;
};

/// Per harvest row: no buffer, greedy, SPSA-optimized and infinite-buffer
/// rates. SPSA starts from whichever of greedy and h(E) = min(E, E[Y]) scores
/// higher on a common stream.
[[nodiscard]] inline std::vector<Fig8Row> fig8Sweep(int gamma, const std::vector<DiscreteDist>& rows,
                                                    const ChannelSpec& channel, const RngStream& rng,
                                                    const Fig8Options& opt = {}) {
  std::vector<Fig8Row> out(rows.size());
  parallelFor(rows.size(), [&](std::size_t r) {
    const FiniteBufferSpec spec{gamma, rows[r], opt.inputLevels};
    spec.validate();
    const RngStream rowRng = rng.substream(r);
    Fig8Row& row = out[r];
    row.meanY = rows[r].mean();
    row.infinite = idealCapacity(row.meanY, channel).rate;
    row.noBuffer = huCapacity(rows[r], channel).rate;
    const MarkovPolicy greedy = greedyPolicy(spec, channel);
    const MarkovPolicy flat = constantPolicy(spec, channel, row.meanY);
    const RngStream evalStream = rowRng.substream(7);
    const InfoRateEstimate g = infoRate(spec, greedy, channel, opt.length, evalStream);
    const InfoRateEstimate f = infoRate(spec, flat, channel, opt.length, evalStream);
    row.greedy = g.rate;
    row.greedySe = g.stdErr;
    row.greedyConditional = g.conditionalRate;
    const SpsaResult s = spsaOptimize(spec, channel, f.rate > g.rate ? flat : greedy,
                                      SpsaOptions{opt.spsaIters, opt.length}, rowRng.substream(8));
    row.optimized = s.estimate.rate;
    row.optimizedSe = s.estimate.stdErr;
    row.optimizedConditional = s.estimate.conditionalRate;
  });
  return out;
}

struct Table1Row {
  double meanY = 0.0;  // as listed
  DiscreteDist harvest;
  bool renormalized = false;
};

/// Harvest table with columns meanY,p1,p2,p3,y1,y2,y3 and a header row. Rows
/// whose probabilities miss 1 are rescaled; an all-zero row is zero harvest.
[[nodiscard]] inline std::vector<Table1Row> readHarvestTable(std::istream& in) {
  std::vector<Table1Row> rows;
  std::string line;
  int lineNo = 0;
  bool header = true;
  while (std::getline(in, line)) {
    ++lineNo;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (header) {
      header = false;
      if (line.find_first_of("0123456789") != 0) continue;
    }
    std::vector<double> v;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        v.push_back(std::stod(cell, &used));
      } catch (const std::exception&) {
        fail("harvest table line ", lineNo, ": not a number: '", cell, "'");
      }
    }
    if (v.size() != 7) fail("harvest table line ", lineNo, ": expected 7 columns, got ", v.size());
    Table1Row row;
    row.meanY = v[0];
    std::vector<std::pair<double, double>> pairs;
    for (int i = 0; i < 3; ++i) {
      if (v[1 + i] < 0.0) fail("harvest table line ", lineNo, ": negative probability");
      if (v[1 + i] > 0.0) pairs.emplace_back(v[4 + i], v[1 + i]);
    }
    double total = 0.0;
    for (const auto& pr : pairs) total += pr.second;
    if (pairs.empty()) fail("harvest table line ", lineNo, ": no positive probability");
    row.renormalized = std::abs(total - 1.0) > DiscreteDist::kSumTol;
    row.harvest = DiscreteDist::fromPairs(std::move(pairs));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace ehcap
