#pragma once

// Lossy storage: only beta1 of each stored unit survives and beta2 leaks per
// slot. Harvest-store-use (HSU) routes everything through the buffer;
// harvest-use-store (HUS) spends fresh energy first and stores the surplus.

#include <cmath>
#include <vector>

#include "ehcap/capacity_ideal.hpp"
#include "ehcap/core.hpp"
#include "ehcap/peak_capacity.hpp"

namespace ehcap {

enum class Arch { ideal, HU, HSU, HUS };

[[nodiscard]] inline const char* toString(Arch a) {
  switch (a) {
    case Arch::ideal: return "ideal";
    case Arch::HU: return "HU";
    case Arch::HSU: return "HSU";
    case Arch::HUS: return "HUS";
  }
  return "?";
}

struct StorageSpec {
  double beta1 = 1.0;
  double beta2 = 0.0;
  Arch arch = Arch::HSU;

  void validate() const {
    if (!(beta1 > 0.0 && beta1 <= 1.0)) fail("StorageSpec: beta1 must lie in (0, 1], got ", beta1);
    if (!(beta2 >= 0.0)) fail("StorageSpec: beta2 must be >= 0, got ", beta2);
  }
};

namespace detail {

inline void checkStorage(double beta1, double beta2) { StorageSpec{beta1, beta2, Arch::HSU}.validate(); }

// g(c) = beta1 E[(Y - c)^+] - E[(c - Y)^+] - beta2, strictly decreasing.
inline double storageBalance(const DiscreteDist& harvest, double beta1, double beta2, double c) {
  return harvest.expect([&](double y) { return beta1 * std::max(y - c, 0.0) - std::max(c - y, 0.0); }) - beta2;
}

}  // namespace detail

/// Root of g(c); 0 when g(0) <= 0.
[[nodiscard]] inline double largestC(const DiscreteDist& harvest, double beta1, double beta2) {
  detail::checkStorage(beta1, beta2);
  detail::checkHarvest(harvest, "largestC");
  if (detail::storageBalance(harvest, beta1, beta2, 0.0) <= 0.0) return 0.0;
  // Lossless storage makes g affine: g(c) = E[Y] - c - beta2.
  if (beta1 == 1.0) return harvest.mean() - beta2;
  double lo = 0.0, hi = harvest.maxPoint();
  while (hi - lo > 1e-12 * std::max(1.0, hi)) {
    const double mid = 0.5 * (lo + hi);
    (detail::storageBalance(harvest, beta1, beta2, mid) > 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

[[nodiscard]] inline RateResult rHSU(const DiscreteDist& harvest, double beta1, double beta2, const ChannelSpec& spec) {
  spec.validate();
  detail::checkStorage(beta1, beta2);
  return closedForm(halfLog1p(std::max(0.0, beta1 * harvest.mean() - beta2) / spec.noiseVar), spec);
}

[[nodiscard]] inline RateResult rHUS(const DiscreteDist& harvest, double beta1, double beta2, const ChannelSpec& spec) {
  spec.validate();
  const double c = largestC(harvest, beta1, beta2);
  RateResult r = closedForm(halfLog1p(c / spec.noiseVar), spec);
  r.meta["c"] = c;
  return r;
}

struct ArchRow {
  double beta1 = 0.0;
  double rateHU = 0.0;
  double rateHSU = 0.0;
  double rateHUS = 0.0;
};

/// HU does not depend on beta1; it is solved once for the whole grid.
[[nodiscard]] inline std::vector<ArchRow> architectureComparison(const DiscreteDist& harvest,
                                                                 const std::vector<double>& beta1Grid, double beta2,
                                                                 const ChannelSpec& spec) {
  if (beta1Grid.empty()) fail("architectureComparison: empty beta1 grid");
  const double hu = huCapacity(harvest, spec).rate;
  std::vector<ArchRow> rows;
  for (double b1 : beta1Grid)
    rows.push_back({b1, hu, rHSU(harvest, b1, beta2, spec).rate, rHUS(harvest, b1, beta2, spec).rate});
  return rows;
}

/// Smallest beta1 on the grid above which HSU beats HU, if the curves cross.
[[nodiscard]] inline std::optional<double> huCrossing(const std::vector<ArchRow>& rows) {
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const double d0 = rows[i - 1].rateHU - rows[i - 1].rateHSU, d1 = rows[i].rateHU - rows[i].rateHSU;
    if ((d0 > 0.0) != (d1 > 0.0)) return rows[i - 1].beta1 + (rows[i].beta1 - rows[i - 1].beta1) * d0 / (d0 - d1);
  }
  return std::nullopt;
}

struct FadingStorageRates {
  double beta1 = 0.0;
  double sNoCsit = 0.0;   // HSU, constant power beta1 E[Y] - beta2
  double sCsit = 0.0;     // HSU, per-fade allocation of the storable energy
  double usNoCsit = 0.0;  // HUS, constant power c
  double usCsit = 0.0;    // HUS, water-filling with mean c
  double huCsit = 0.0;    // no buffer, peak-optimal input per (y, h)
  double huNoCsit = 0.0;  // no buffer, peak-optimal input per y only
};

/// Every architecture over fading. The CSIT buffered rates use the same
/// water-filling rule as the ideal fading capacity: HSU delivers beta1 T(h)
/// - beta2 in state h, so maximizing over T with E[T] <= E[Y] amounts to
/// water-filling the delivered power with mean beta1 E[Y] - beta2.
[[nodiscard]] inline FadingStorageRates fadingStorageRates(const DiscreteDist& harvest, const DiscreteDist& fades,
                                                           double beta1, double beta2, const ChannelSpec& spec,
                                                           std::optional<std::pair<double, double>> huRates = std::nullopt) {
  spec.validate();
  detail::checkStorage(beta1, beta2);
  FadingStorageRates r;
  r.beta1 = beta1;
  const double delivered = std::max(0.0, beta1 * harvest.mean() - beta2);
  const double c = largestC(harvest, beta1, beta2);
  r.sNoCsit = ergodicCapacityNoCSIT(fades, delivered, spec).rate;
  r.sCsit = ergodicCapacityCSIT(fades, delivered, spec).rate;
  r.usNoCsit = ergodicCapacityNoCSIT(fades, c, spec).rate;
  r.usCsit = ergodicCapacityCSIT(fades, c, spec).rate;
  if (huRates) {
    r.huCsit = huRates->first;
    r.huNoCsit = huRates->second;
  } else {
    r.huCsit = huFadingCapacity(harvest, fades, true, spec).rate;
    r.huNoCsit = huFadingCapacity(harvest, fades, false, spec).rate;
  }
  return r;
}

/// fadingStorageRates over a beta1 grid, sharing the beta1-free no-buffer rates.
[[nodiscard]] inline std::vector<FadingStorageRates> fadingArchitectureSweep(const DiscreteDist& harvest,
                                                                            const DiscreteDist& fades,
                                                                            const std::vector<double>& beta1Grid,
                                                                            double beta2, const ChannelSpec& spec) {
  const std::pair<double, double> hu{huFadingCapacity(harvest, fades, true, spec).rate,
                                     huFadingCapacity(harvest, fades, false, spec).rate};
  std::vector<FadingStorageRates> rows;
  for (double b1 : beta1Grid) rows.push_back(fadingStorageRates(harvest, fades, b1, beta2, spec, hu));
  return rows;
}

}  // namespace ehcap
