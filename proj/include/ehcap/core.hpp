#pragma once

// Shared numeric substrate: discrete distributions, channel parameters,
// Gaussian quadrature, output entropies and a counter-based RNG.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace ehcap {

class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

namespace detail {
template <typename... Args>
[[nodiscard]] std::string concat(Args&&... args) {
  std::ostringstream oss;
  oss.precision(17);
  (oss << ... << std::forward<Args>(args));
  return oss.str();
}
}  // namespace detail

template <typename... Args>
[[noreturn]] void fail(Args&&... args) {
  throw Error(detail::concat(std::forward<Args>(args)...));
}

// Non-fatal diagnostics (renormalized inputs, formulas used outside their
// stated range). The default sink writes to stderr.
using WarningSink = std::function<void(const std::string&)>;

inline WarningSink& warningSink() {
  static WarningSink sink = [](const std::string& msg) { std::fprintf(stderr, "warning: %s\n", msg.c_str()); };
  return sink;
}

template <typename... Args>
void warn(Args&&... args) {
  if (warningSink()) warningSink()(detail::concat(std::forward<Args>(args)...));
}

enum class LogBase { bits, nats };

[[nodiscard]] inline double fromNats(double v, LogBase base) {
  return base == LogBase::bits ? v / std::numbers::ln2 : v;
}

[[nodiscard]] inline double toNats(double v, LogBase base) {
  return base == LogBase::bits ? v * std::numbers::ln2 : v;
}

[[nodiscard]] inline const char* toString(LogBase base) {
  return base == LogBase::bits ? "bits" : "nats";
}

// ---------------------------------------------------------------------------
// ChannelSpec

struct ChannelSpec {
  double noiseVar = 1.0;
  LogBase logBase = LogBase::bits;
  int quadNodes = 96;

  void validate() const {
    if (!(noiseVar > 0.0) || !std::isfinite(noiseVar))
      fail("ChannelSpec: noiseVar must be positive and finite, got ", noiseVar);
    if (quadNodes < 16) fail("ChannelSpec: quadNodes must be >= 16, got ", quadNodes);
  }

  [[nodiscard]] ChannelSpec withNoise(double var) const {
    ChannelSpec s = *this;
    s.noiseVar = var;
    return s;
  }

  [[nodiscard]] double sigma() const { return std::sqrt(noiseVar); }

  /// Differential entropy of the noise, in nats.
  [[nodiscard]] double noiseEntropyNats() const {
    return 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e * noiseVar);
  }
};

// ---------------------------------------------------------------------------
// DiscreteDist

/// Finite-support probability law with strictly increasing mass points.
class DiscreteDist {
public:
  static constexpr double kSumTol = 1e-9;

  DiscreteDist() = default;

  /// Validating constructor. Throws ehcap::Error on any invariant violation.
  DiscreteDist(std::vector<double> points, std::vector<double> probs)
      : points_(std::move(points)), probs_(std::move(probs)) {
    validate();
  }

  [[nodiscard]] static DiscreteDist pointMass(double x) { return DiscreteDist({x}, {1.0}); }

  /// Builds a law from unsorted (point, prob) pairs, merging duplicates and
  /// dropping zero-probability entries. Probabilities are renormalized.
  [[nodiscard]] static DiscreteDist fromPairs(std::vector<std::pair<double, double>> pairs,
                                              double mergeTol = 0.0) {
    std::sort(pairs.begin(), pairs.end());
    std::vector<double> pts, prs;
    double total = 0.0;
    for (const auto& [x, p] : pairs) {
      if (!(p >= 0.0)) fail("DiscreteDist: negative probability ", p);
      total += p;
    }
    if (!(total > 0.0)) fail("DiscreteDist: total probability must be positive");
    for (const auto& [x, p] : pairs) {
      if (p <= 0.0) continue;
      if (!pts.empty() && x - pts.back() <= mergeTol) {
        prs.back() += p / total;
        continue;
      }
      pts.push_back(x);
      prs.push_back(p / total);
    }
    return DiscreteDist(std::move(pts), std::move(prs));
  }

  /// Like the validating constructor but rescales probabilities whose sum is
  /// off. Sets `renormalized` when a rescale was needed.
  [[nodiscard]] static DiscreteDist normalized(std::vector<double> points,
                                               std::vector<double> probs,
                                               bool* renormalized = nullptr) {
    const double s = std::accumulate(probs.begin(), probs.end(), 0.0);
    const bool off = std::abs(s - 1.0) > kSumTol;
    if (renormalized) *renormalized = off;
    if (off && s > 0.0)
      for (double& p : probs) p /= s;
    return DiscreteDist(std::move(points), std::move(probs));
  }

  [[nodiscard]] std::span<const double> points() const { return points_; }
  [[nodiscard]] std::span<const double> probs() const { return probs_; }
  [[nodiscard]] std::size_t size() const { return points_.size(); }
  [[nodiscard]] double point(std::size_t i) const { return points_[i]; }
  [[nodiscard]] double prob(std::size_t i) const { return probs_[i]; }

  [[nodiscard]] double mean() const { return expect([](double x) { return x; }); }
  [[nodiscard]] double secondMoment() const { return expect([](double x) { return x * x; }); }
  [[nodiscard]] double minPoint() const { return points_.front(); }
  [[nodiscard]] double maxPoint() const { return points_.back(); }
  [[nodiscard]] bool isDegenerate() const { return points_.size() == 1; }

  template <typename F>
  [[nodiscard]] double expect(F&& f) const {
    double s = 0.0;
    for (std::size_t i = 0; i < points_.size(); ++i) s += probs_[i] * f(points_[i]);
    return s;
  }

  /// Index of the mass point equal to x (exact match), if any.
  [[nodiscard]] std::optional<std::size_t> find(double x) const {
    auto it = std::lower_bound(points_.begin(), points_.end(), x);
    if (it == points_.end() || *it != x) return std::nullopt;
    return static_cast<std::size_t>(it - points_.begin());
  }

  /// Removes mass points with zero probability.
  [[nodiscard]] DiscreteDist pruned() const {
    std::vector<std::pair<double, double>> pairs;
    for (std::size_t i = 0; i < size(); ++i) pairs.emplace_back(points_[i], probs_[i]);
    return fromPairs(std::move(pairs));
  }

  /// Law of a*X.
  [[nodiscard]] DiscreteDist scaled(double a) const {
    std::vector<std::pair<double, double>> pairs;
    for (std::size_t i = 0; i < size(); ++i) pairs.emplace_back(a * points_[i], probs_[i]);
    return fromPairs(std::move(pairs));
  }

  [[nodiscard]] double cdfSample(double u) const {
    double acc = 0.0;
    for (std::size_t i = 0; i < size(); ++i) {
      acc += probs_[i];
      if (u < acc) return points_[i];
    }
    return points_.back();
  }

  friend bool operator==(const DiscreteDist&, const DiscreteDist&) = default;

private:
  void validate() const {
    if (points_.empty()) fail("DiscreteDist: at least one mass point required");
    if (points_.size() != probs_.size())
      fail("DiscreteDist: ", points_.size(), " points but ", probs_.size(), " probabilities");
    double s = 0.0;
    for (std::size_t i = 0; i < probs_.size(); ++i) {
      if (!std::isfinite(points_[i])) fail("DiscreteDist: non-finite point at index ", i);
      if (!(probs_[i] >= 0.0)) fail("DiscreteDist: negative probability at index ", i);
      if (i > 0 && !(points_[i] > points_[i - 1]))
        fail("DiscreteDist: points must be strictly increasing (index ", i, ")");
      s += probs_[i];
    }
    if (std::abs(s - 1.0) > kSumTol) fail("DiscreteDist: probabilities sum to ", s, ", not 1");
  }

  std::vector<double> points_{0.0};
  std::vector<double> probs_{1.0};
};

inline void to_json(nlohmann::json& j, const DiscreteDist& d) {
  j = nlohmann::json{{"points", std::vector<double>(d.points().begin(), d.points().end())},
                     {"probs", std::vector<double>(d.probs().begin(), d.probs().end())}};
}

inline void from_json(const nlohmann::json& j, DiscreteDist& d) {
  if (!j.is_object() || !j.contains("points") || !j.contains("probs"))
    fail("DiscreteDist JSON must be an object with \"points\" and \"probs\"");
  d = DiscreteDist(j.at("points").get<std::vector<double>>(),
                   j.at("probs").get<std::vector<double>>());
}

// ---------------------------------------------------------------------------
// RngStream: counter-based generator keyed by (seed, streamId).

class RngStream {
public:
  using result_type = std::uint64_t;

  RngStream(std::uint64_t seed, std::uint64_t streamId)
      : seed_(seed), streamId_(streamId), key_(mix(seed ^ mix(streamId + 0x632be59bd9b4e019ULL))) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() { return mix(key_ + (counter_++) * 0x9e3779b97f4a7c15ULL); }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  /// Standard normal via Box-Muller; one value per call, second value cached.
  double normal() {
    if (hasSpare_) {
      hasSpare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * std::numbers::pi * u2);
    hasSpare_ = true;
    return r * std::cos(2.0 * std::numbers::pi * u2);
  }

  double sample(const DiscreteDist& d) { return d.cdfSample(uniform()); }

  /// Independent stream derived from this one's key.
  [[nodiscard]] RngStream substream(std::uint64_t id) const {
    return RngStream(seed_, mix(streamId_ * 0x100000001b3ULL + id + 1));
  }

  [[nodiscard]] std::uint64_t seed() const { return seed_; }
  [[nodiscard]] std::uint64_t streamId() const { return streamId_; }

private:
  static constexpr std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t seed_;
  std::uint64_t streamId_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool hasSpare_ = false;
};

// ---------------------------------------------------------------------------
// Quadrature

struct QuadRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

namespace detail {

/// Gauss-Hermite rule for weight exp(-t^2), Newton iteration on the
/// orthonormal recurrence.
inline QuadRule computeGaussHermite(int n) {
  QuadRule r;
  r.nodes.assign(n, 0.0);
  r.weights.assign(n, 0.0);
  const double pim4 = std::pow(std::numbers::pi, -0.25);
  const int m = (n + 1) / 2;
  double z = 0.0;
  for (int i = 0; i < m; ++i) {
    if (i == 0)
      z = std::sqrt(2.0 * n + 1) - 1.85575 * std::pow(2.0 * n + 1, -1.0 / 6.0);
    else if (i == 1)
      z -= 1.14 * std::pow(static_cast<double>(n), 0.426) / z;
    else if (i == 2)
      z = 1.86 * z - 0.86 * r.nodes[0];
    else if (i == 3)
      z = 1.91 * z - 0.91 * r.nodes[1];
    else
      z = 2.0 * z - r.nodes[i - 2];
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p1 = pim4, p2 = 0.0;
      for (int j = 0; j < n; ++j) {
        const double p3 = p2;
        p2 = p1;
        p1 = z * std::sqrt(2.0 / (j + 1)) * p2 - std::sqrt(static_cast<double>(j) / (j + 1)) * p3;
      }
      pp = std::sqrt(2.0 * n) * p2;
      const double z1 = z;
      z = z1 - p1 / pp;
      if (std::abs(z - z1) <= 1e-15 * std::max(1.0, std::abs(z))) break;
    }
    r.nodes[i] = z;
    r.nodes[n - 1 - i] = -z;
    r.weights[i] = 2.0 / (pp * pp);
    r.weights[n - 1 - i] = r.weights[i];
  }
  return r;
}

/// 10-point Gauss-Legendre on [-1, 1].
inline constexpr double kGL10x[5] = {0.1488743389816312, 0.4333953941292472, 0.6794095682990244,
                                     0.8650633666889845, 0.9739065285171717};
inline constexpr double kGL10w[5] = {0.2955242247147529, 0.2692667193099963, 0.2190863625159820,
                                     0.1494513491505806, 0.0666713443086881};

template <typename F>
double gaussLegendre10(F& f, double a, double b) {
  const double c = 0.5 * (a + b), h = 0.5 * (b - a);
  double s = 0.0;
  for (int i = 0; i < 5; ++i) s += kGL10w[i] * (f(c - h * kGL10x[i]) + f(c + h * kGL10x[i]));
  return s * h;
}

template <typename F>
double adaptiveGL(F& f, double a, double b, double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double left = gaussLegendre10(f, a, m);
  const double right = gaussLegendre10(f, m, b);
  if (depth <= 0 || std::abs(left + right - whole) <= tol) return left + right;
  return adaptiveGL(f, a, m, left, 0.5 * tol, depth - 1) +
         adaptiveGL(f, m, b, right, 0.5 * tol, depth - 1);
}

}  // namespace detail

/// Cached Gauss-Hermite rule (weight exp(-t^2)) with n nodes.
inline const QuadRule& gaussHermite(int n) {
  thread_local std::map<int, QuadRule> cache;
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, detail::computeGaussHermite(n)).first;
  return it->second;
}

/// Composite adaptive integral over [a, b] built from 10-point Gauss-Legendre
/// panels no wider than `panel`.
template <typename F>
double integrate(F&& f, double a, double b, double panel, double tol = 1e-13) {
  if (!(b > a)) return 0.0;
  const int n = std::max(1, static_cast<int>(std::ceil((b - a) / panel)));
  const double h = (b - a) / n;
  double s = 0.0;
  for (int i = 0; i < n; ++i) {
    const double lo = a + i * h, hi = lo + h;
    s += detail::adaptiveGL(f, lo, hi, detail::gaussLegendre10(f, lo, hi), tol / n, 12);
  }
  return s;
}

/// E[f(G)] with G ~ N(mean, var), Gauss-Hermite with spec.quadNodes nodes.
template <typename F>
double gaussExpect(F&& f, double mean, double var, const ChannelSpec& spec) {
  if (!(var > 0.0)) fail("gaussExpect: variance must be positive, got ", var);
  const QuadRule& rule = gaussHermite(spec.quadNodes);
  const double scale = std::sqrt(2.0 * var);
  double s = 0.0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
    const double x = mean + scale * rule.nodes[i];
    const double v = f(x);
    if (!std::isfinite(v)) fail("gaussExpect: non-finite integrand at node x = ", x);
    s += rule.weights[i] * v;
  }
  return s / std::sqrt(std::numbers::pi);
}

// ---------------------------------------------------------------------------
// Gaussian mixtures

/// Output density of W = X + N for a discrete input law, evaluated in the log
/// domain so far tails stay finite.
class MixtureDensity {
public:
  MixtureDensity(std::span<const double> points, std::span<const double> probs, double noiseVar)
      : points_(points.begin(), points.end()), noiseVar_(noiseVar) {
    logProbs_.reserve(probs.size());
    for (double p : probs) logProbs_.push_back(p > 0.0 ? std::log(p) : -std::numeric_limits<double>::infinity());
    logNorm_ = -0.5 * std::log(2.0 * std::numbers::pi * noiseVar);
  }

  MixtureDensity(const DiscreteDist& d, double noiseVar) : MixtureDensity(d.points(), d.probs(), noiseVar) {}

  [[nodiscard]] double logPdf(double w) const {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < points_.size(); ++j) {
      const double d = w - points_[j];
      mx = std::max(mx, logProbs_[j] - d * d / (2.0 * noiseVar_));
    }
    double s = 0.0;
    for (std::size_t j = 0; j < points_.size(); ++j) {
      const double d = w - points_[j];
      s += std::exp(logProbs_[j] - d * d / (2.0 * noiseVar_) - mx);
    }
    return mx + std::log(s) + logNorm_;
  }

  /// log f, d/dw log f and d2/dw2 log f.
  void logPdfDerivs(double w, double& l, double& d1, double& d2) const {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < points_.size(); ++j) {
      const double d = w - points_[j];
      mx = std::max(mx, logProbs_[j] - d * d / (2.0 * noiseVar_));
    }
    double s = 0.0, m1 = 0.0, m2 = 0.0;
    for (std::size_t j = 0; j < points_.size(); ++j) {
      const double d = w - points_[j];
      const double e = std::exp(logProbs_[j] - d * d / (2.0 * noiseVar_) - mx);
      s += e;
      m1 += e * d;
      m2 += e * d * d;
    }
    m1 /= s;
    m2 /= s;
    l = mx + std::log(s) + logNorm_;
    d1 = -m1 / noiseVar_;
    d2 = -1.0 / noiseVar_ + (m2 - m1 * m1) / (noiseVar_ * noiseVar_);
  }

  [[nodiscard]] double pdf(double w) const { return std::exp(logPdf(w)); }

private:
  std::vector<double> points_;
  std::vector<double> logProbs_;
  double noiseVar_;
  double logNorm_;
};

/// Information density i(x) = D(N(x, s2) || f_W) in nats, where f_W is the
/// output law of the given mixture. Gauss-Hermite over the noise.
[[nodiscard]] inline double informationDensity(double x, const MixtureDensity& out, const ChannelSpec& spec) {
  const double e = gaussExpect([&](double w) { return out.logPdf(w); }, x, spec.noiseVar, spec);
  return -spec.noiseEntropyNats() - e;
}

/// i(x), i'(x), i''(x) in nats.
inline void informationDensityDerivs(double x, const MixtureDensity& out, const ChannelSpec& spec,
                                     double& i0, double& i1, double& i2) {
  const QuadRule& rule = gaussHermite(spec.quadNodes);
  const double scale = std::sqrt(2.0 * spec.noiseVar);
  double s0 = 0.0, s1 = 0.0, s2 = 0.0;
  for (std::size_t k = 0; k < rule.nodes.size(); ++k) {
    double l, d1, d2;
    out.logPdfDerivs(x + scale * rule.nodes[k], l, d1, d2);
    s0 += rule.weights[k] * l;
    s1 += rule.weights[k] * d1;
    s2 += rule.weights[k] * d2;
  }
  const double norm = 1.0 / std::sqrt(std::numbers::pi);
  i0 = -spec.noiseEntropyNats() - s0 * norm;
  i1 = -s1 * norm;
  i2 = -s2 * norm;
}

/// Differential entropy h(X + N) for discrete X, in spec.logBase units.
/// Adaptive composite Gauss-Legendre over [min - 8 sigma, max + 8 sigma].
[[nodiscard]] inline double mixtureOutputEntropy(const DiscreteDist& input, const ChannelSpec& spec) {
  spec.validate();
  const MixtureDensity out(input, spec.noiseVar);
  const double s = spec.sigma();
  auto integrand = [&](double w) {
    const double l = out.logPdf(w);
    return -std::exp(l) * l;
  };
  const double lo = input.minPoint() - 8.0 * s, hi = input.maxPoint() + 8.0 * s;
  return fromNats(integrate(integrand, lo, hi, 0.5 * s, 1e-13), spec.logBase);
}

/// I(X; X + N) = h(W) - h(N) for discrete X, in spec.logBase units.
[[nodiscard]] inline double discreteInputMI(const DiscreteDist& input, const ChannelSpec& spec) {
  if (input.isDegenerate()) return 0.0;
  const double hw = toNats(mixtureOutputEntropy(input, spec), spec.logBase);
  return fromNats(std::max(0.0, hw - spec.noiseEntropyNats()), spec.logBase);
}

/// Same quantity as discreteInputMI via the information-density route
/// sum_j q_j i(x_j), Gauss-Hermite only.
[[nodiscard]] inline double discreteInputMIDensity(const DiscreteDist& input, const ChannelSpec& spec) {
  const MixtureDensity out(input, spec.noiseVar);
  double s = 0.0;
  for (std::size_t j = 0; j < input.size(); ++j)
    if (input.prob(j) > 0.0) s += input.prob(j) * informationDensity(input.point(j), out, spec);
  return fromNats(std::max(0.0, s), spec.logBase);
}

}  // namespace ehcap
