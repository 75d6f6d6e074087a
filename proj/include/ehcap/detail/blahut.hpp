#pragma once

// Blahut-Arimoto over a finite set of input letters for channels whose output
// is (W, V): V is a finite side observation and, given the letter and V,
// W = x + N with x drawn from a letter-specific law on a shared amplitude grid.
// Letter t carries weights a[t][v][j] = P(V = v, x = grid[j] | t); they sum
// to 1 over (v, j).

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "ehcap/core.hpp"
#include "ehcap/detail/input_optimizer.hpp"

namespace ehcap::detail {

struct BlahutResult {
  std::vector<double> q;  // optimal letter law
  double miNats = 0.0;
  double gapNats = 0.0;   // max_t D_t - I, an upper bound on the remaining gap
  int iterations = 0;
};

class BlahutSolver {
public:
  BlahutSolver(std::vector<double> grid, std::vector<std::vector<std::vector<double>>> letters, double noiseVar)
      : grid_(std::move(grid)), letters_(std::move(letters)), noiseVar_(noiseVar) {
    if (letters_.empty()) fail("Blahut-Arimoto: empty input alphabet");
    if (!(noiseVar_ > 0.0)) fail("Blahut-Arimoto: noise variance must be positive");
    nv_ = letters_.front().size();
    const double s = std::sqrt(noiseVar_);
    const auto [mn, mx] = std::minmax_element(grid_.begin(), grid_.end());
    const double lo = *mn - 9.0 * s, hi = *mx + 9.0 * s;
    const int panels = static_cast<int>(std::ceil((hi - lo) / (0.5 * s)));
    const double h = (hi - lo) / panels;
    static constexpr double gx[5] = {0.1488743389816312, 0.4333953941292472, 0.6794095682990244,
                                     0.8650633666889845, 0.9739065285171717};
    static constexpr double gw[5] = {0.2955242247147529, 0.2692667193099963, 0.2190863625159820,
                                     0.1494513491505806, 0.0666713443086881};
    for (int k = 0; k < panels; ++k) {
      const double c = lo + (k + 0.5) * h;
      for (int i = 0; i < 5; ++i)
        for (double sg : {-1.0, 1.0}) {
          w_.push_back(c + sg * 0.5 * h * gx[i]);
          qw_.push_back(0.5 * h * gw[i]);
        }
    }
    const std::size_t nw = w_.size(), ng = grid_.size();
    std::vector<double> phi(nw * ng);
    const double norm = 1.0 / std::sqrt(2.0 * std::numbers::pi * noiseVar_);
    for (std::size_t k = 0; k < nw; ++k)
      for (std::size_t j = 0; j < ng; ++j) {
        const double d = w_[k] - grid_[j];
        phi[k * ng + j] = norm * std::exp(-d * d / (2.0 * noiseVar_));
      }
    // Letter output densities g_t(w, v) and their self-entropy terms.
    dens_.assign(letters_.size(), std::vector<double>(nv_ * nw, 0.0));
    selfTerm_.assign(letters_.size(), 0.0);
    for (std::size_t t = 0; t < letters_.size(); ++t) {
      if (letters_[t].size() != nv_) fail("Blahut-Arimoto: letters disagree on the side alphabet");
      for (std::size_t v = 0; v < nv_; ++v) {
        const auto& a = letters_[t][v];
        for (std::size_t k = 0; k < nw; ++k) {
          double g = 0.0;
          for (std::size_t j = 0; j < ng; ++j)
            if (a[j] > 0.0) g += a[j] * phi[k * ng + j];
          dens_[t][v * nw + k] = g;
          if (g > 0.0) selfTerm_[t] += qw_[k] * g * std::log(g);
        }
      }
    }
  }

  /// Blahut-Arimoto sweeps to get near the optimum, then projected Newton on
  /// the active letters until the duality gap max_t D_t - I drops below tol
  /// (nats).
  [[nodiscard]] BlahutResult solve(double tol = 1e-9, int warmSweeps = 60,
                                   std::vector<double> start = {}) const {
    const std::size_t nt = letters_.size();
    BlahutResult r;
    r.q = start.size() == nt ? std::move(start) : std::vector<double>(nt, 1.0 / nt);
    std::vector<double> d(nt);
    for (int sweep = 0; sweep < warmSweeps; ++sweep, ++r.iterations) {
      evaluate(r.q, d, r.miNats, r.gapNats);
      if (r.gapNats <= tol) return r;
      const double dmax = *std::max_element(d.begin(), d.end());
      double z = 0.0;
      for (std::size_t t = 0; t < nt; ++t) z += (r.q[t] *= std::exp(d[t] - dmax));
      for (double& x : r.q) x /= z;
    }
    for (int it = 0; it < 200; ++it, ++r.iterations) {
      evaluate(r.q, d, r.miNats, r.gapNats);
      if (r.gapNats <= tol) break;
      if (!newtonStep(r.q, d, r.miNats)) break;
    }
    evaluate(r.q, d, r.miNats, r.gapNats);
    return r;
  }

private:
  // D_t = KL(g_t || f) for every letter; I = sum q_t D_t.
  void evaluate(const std::vector<double>& q, std::vector<double>& d, double& mi, double& gap) const {
    const std::size_t nt = letters_.size(), nw = w_.size();
    std::vector<double> f(nv_ * nw, 0.0);
    for (std::size_t t = 0; t < nt; ++t)
      if (q[t] > 0.0)
        for (std::size_t i = 0; i < f.size(); ++i) f[i] += q[t] * dens_[t][i];
    std::vector<double> logf(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) logf[i] = f[i] > 0.0 ? std::log(f[i]) : -745.0;
    mi = 0.0;
    double dmax = -std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < nt; ++t) {
      double cross = 0.0;
      for (std::size_t v = 0; v < nv_; ++v)
        for (std::size_t k = 0; k < nw; ++k) cross += qw_[k] * dens_[t][v * nw + k] * logf[v * nw + k];
      d[t] = selfTerm_[t] - cross;
      mi += q[t] * d[t];
      dmax = std::max(dmax, d[t]);
    }
    gap = dmax - mi;
    mi = std::max(0.0, mi);
  }

  [[nodiscard]] double objective(const std::vector<double>& q) const {
    std::vector<double> d(q.size());
    double mi, gap;
    evaluate(q, d, mi, gap);
    return mi;
  }

  // One Newton step of max I(q) on the simplex over the letters in use plus
  // the most profitable unused one. Returns false when no progress is made.
  bool newtonStep(std::vector<double>& q, const std::vector<double>& d, double mi) const {
    const std::size_t nt = letters_.size(), nw = w_.size();
    std::vector<char> active(nt, 0);
    std::size_t best = 0;
    for (std::size_t t = 0; t < nt; ++t) {
      active[t] = q[t] > 0.0;
      if (d[t] > d[best]) best = t;
    }
    active[best] = 1;
    std::vector<double> f(nv_ * nw, 0.0);
    for (std::size_t t = 0; t < nt; ++t)
      if (q[t] > 0.0)
        for (std::size_t i = 0; i < f.size(); ++i) f[i] += q[t] * dens_[t][i];

    for (int pass = 0; pass < static_cast<int>(nt); ++pass) {
      std::vector<std::size_t> idx;
      for (std::size_t t = 0; t < nt; ++t)
        if (active[t]) idx.push_back(t);
      const int m = static_cast<int>(idx.size());
      if (m < 2) return false;
      // Bordered system [H 1; 1' 0][dq; nu] = [-D; 0], H_ts = -int g_t g_s / f.
      const int n = m + 1;
      std::vector<double> a(n * n, 0.0), b(n, 0.0);
      for (int i = 0; i < m; ++i)
        for (int j = i; j < m; ++j) {
          const auto& gi = dens_[idx[i]];
          const auto& gj = dens_[idx[j]];
          double s = 0.0;
          for (std::size_t k = 0; k < f.size(); ++k)
            if (f[k] > 1e-300) s += qw_[k % nw] * gi[k] * gj[k] / f[k];
          a[i * n + j] = a[j * n + i] = -s;
        }
      double diag = 0.0;
      for (int i = 0; i < m; ++i) diag = std::max(diag, -a[i * n + i]);
      for (int i = 0; i < m; ++i) {
        a[i * n + i] -= 1e-10 * diag;
        a[i * n + m] = a[m * n + i] = 1.0;
        b[i] = -d[idx[i]];
      }
      if (!solveLinear(a, b, n)) return false;
      // Letters at zero that want to decrease leave the active set.
      bool changed = false;
      for (int i = 0; i < m; ++i)
        if (q[idx[i]] <= 0.0 && b[i] < 0.0) {
          active[idx[i]] = 0;
          changed = true;
        }
      if (changed) continue;

      // Vanishing letters that block the step are dropped outright.
      for (int i = 0; i < m; ++i)
        if (b[i] < 0.0 && q[idx[i]] < 1e-9 * -b[i]) {
          q[idx[i]] = 0.0;
          active[idx[i]] = 0;
          changed = true;
        }
      if (changed) continue;
      double tmax = 1.0;
      for (int i = 0; i < m; ++i)
        if (b[i] < 0.0) tmax = std::min(tmax, q[idx[i]] / -b[i]);
      for (double t = tmax; t > 1e-9 * tmax; t *= 0.5) {
        std::vector<double> trial = q;
        for (int i = 0; i < m; ++i) trial[idx[i]] = std::max(0.0, q[idx[i]] + t * b[i]);
        if (t == tmax)
          for (int i = 0; i < m; ++i)
            if (b[i] < 0.0 && q[idx[i]] / -b[i] <= tmax) trial[idx[i]] = 0.0;
        double z = 0.0;
        for (double x : trial) z += x;
        for (double& x : trial) x /= z;
        if (objective(trial) >= mi) {
          q = std::move(trial);
          return true;
        }
      }
      return false;
    }
    return false;
  }

  std::vector<double> grid_;
  std::vector<std::vector<std::vector<double>>> letters_;
  double noiseVar_;
  std::size_t nv_ = 1;
  std::vector<double> w_, qw_;
  std::vector<std::vector<double>> dens_;
  std::vector<double> selfTerm_;
};

/// Capacity-achieving law restricted to the given amplitudes (no side info).
inline BlahutResult gridCapacity(const std::vector<double>& grid, double noiseVar, double tol = 1e-9) {
  std::vector<std::vector<std::vector<double>>> letters(grid.size());
  for (std::size_t j = 0; j < grid.size(); ++j) {
    letters[j].assign(1, std::vector<double>(grid.size(), 0.0));
    letters[j][0][j] = 1.0;
  }
  return BlahutSolver(grid, std::move(letters), noiseVar).solve(tol);
}

}  // namespace ehcap::detail
