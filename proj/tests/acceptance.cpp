// One PASS/FAIL line per acceptance criterion, each with its wall time and
// time budget. Exit status is the number of failed criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "ehcap/experiment.hpp"

using namespace ehcap;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::vector<std::string> notes;

  void need(bool ok, const std::string& what) {
    if (!ok) pass = false;
    notes.push_back(std::string(ok ? "ok    " : "FAIL  ") + what);
  }
};

std::string num(double v) { return brief(v); }

// Closed-form peak capacity by a plain trapezoid sum, bits.
double peakOracle(double y) {
  double s = 0.0;
  const double dg = 1e-4;
  for (double g = -12; g <= 12; g += dg) {
    const double a = std::abs(y - std::sqrt(y) * g);
    s += std::exp(-g * g / 2) / std::sqrt(2 * std::numbers::pi) * (a + std::log1p(std::exp(-2 * a)) - std::numbers::ln2) * dg;
  }
  return (y - s) / std::numbers::ln2;
}

const ChannelSpec kCh{};

Outcome theorem1() {
  Outcome o;
  SignalingParams prm;
  prm.harvest = experiments::example1Harvest();
  const auto r = simulateSignaling(Scheme::truncGauss, prm, 1000000, RngStream(0, 0));
  const double ref = 0.5 * std::log2(1.625);
  o.need(std::abs(r.empiricalMI - ref) <= 0.02 * ref,
         "empirical MI " + num(r.empiricalMI) + " within 2% of " + num(ref));
  o.need(r.stats.truncationRateFinalHalf < 0.01,
         "final-half truncation rate " + num(r.stats.truncationRateFinalHalf) + " < 1%");
  return o;
}

Outcome waterfilling() {
  Outcome o;
  const DiscreteDist fades = experiments::example3Fades();
  const double budget = experiments::example3Harvest().mean();
  const auto w = waterfill(fades, budget, kCh);
  double used = 0.0;
  bool slack = true;
  for (std::size_t i = 0; i < fades.size(); ++i) {
    const double h = fades.point(i), t = w.at(h);
    used += fades.prob(i) * t;
    // Active states sit exactly on the water level, the rest get nothing.
    if (h > w.cutoff ? t != 1.0 / w.cutoff - 1.0 / h : t != 0.0) slack = false;
  }
  o.need(std::abs(used - budget) < 1e-9, "budget residual " + num(std::abs(used - budget)) + " < 1e-9");
  o.need(slack, "complementary slackness exact at every state");
  bool same = true;
  for (double e : {0.1, 0.625, 3.0}) {
    const double a = ergodicCapacityCSIT(DiscreteDist::pointMass(1.0), e, kCh).rate;
    const double b = 0.5 * std::log2(1.0 + e);
    if (std::abs(a - b) > 2 * std::numeric_limits<double>::epsilon() * b) same = false;
  }
  o.need(same, "single unit fade equals the ideal closed form to machine precision");
  return o;
}

Outcome peak() {
  Outcome o;
  for (double y : {0.25, 0.5, 1.0}) {
    const auto s = peakCapacity(y, kCh);
    const double ref = peakOracle(y);
    o.need(std::abs(s.capacity - ref) <= 1e-3 && s.kktResidual <= 1e-6,
           "y=" + num(y) + ": C=" + num(s.capacity) + " vs " + num(ref) + ", KKT " + num(s.kktResidual));
  }
  return o;
}

Outcome sleepWake() {
  Outcome o;
  const auto grid = experiments::stepGrid(0.1, 3.0, 0.1);
  const auto rows = sleepWakeCurve(grid, 0.5, kCh);
  bool a = true, b = true, mono = true, conc = true;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (r.meanHarvest <= 0.5 && !(r.noSleep == 0.0 && r.capacity > 0.0)) a = false;
    if (r.capacity < r.gaussianWake - 1e-6 || r.gaussianWake < r.medaBaseline - 1e-6) b = false;
    if (i > 0 && r.pStar > rows[i - 1].pStar + 1e-6) mono = false;
    if (i > 0 && i + 1 < rows.size() && r.capacity < 0.5 * (rows[i - 1].capacity + rows[i + 1].capacity) - 1e-6)
      conc = false;
  }
  o.need(a, "(a) no-sleep rate 0 and capacity > 0 for E[Y] <= 0.5");
  o.need(b, "(b) capacity >= Gaussian wake >= bursty baseline");
  o.need(mono, "(c) p* nonincreasing in E[Y]");
  o.need(rows.back().pStar < 0.05, "(c) p* < 0.05 at E[Y]=3: p* = " + num(rows.back().pStar));
  o.need(conc, "(d) midpoint concavity");
  return o;
}

Outcome storage() {
  Outcome o;
  const DiscreteDist y = experiments::example1Harvest();
  const auto rows = architectureComparison(y, experiments::stepGrid(0.05, 1.0, 0.05), 0.0, kCh);
  bool order = true;
  for (const auto& r : rows)
    if (r.rateHUS < r.rateHSU) order = false;
  o.need(rows.back().beta1 == 1.0 && rows.back().rateHUS == rows.back().rateHSU, "R_HUS == R_HSU at beta1 = 1");
  o.need(order, "R_HUS >= R_HSU over the sweep");
  const auto x = huCrossing(rows);
  bool below = x.has_value();
  if (x)
    for (const auto& r : rows)
      if (r.beta1 < *x && !(r.rateHU > r.rateHSU)) below = false;
  o.need(below, x ? "crossing at beta1 = " + num(*x) + ", HU > HSU below it" : "no HU/HSU crossing");
  return o;
}

Outcome fading() {
  Outcome o;
  const auto rows = fadingArchitectureSweep(experiments::example3Harvest(), experiments::example3Fades(),
                                            experiments::stepGrid(0.5, 1.0, 0.05), 0.0, kCh);
  bool hus = true, csit = true;
  for (const auto& r : rows) {
    if (r.usCsit < r.sCsit || r.usNoCsit < r.sNoCsit) hus = false;
    if (r.sCsit < r.sNoCsit || r.usCsit < r.usNoCsit || r.huCsit < r.huNoCsit - 1e-9) csit = false;
  }
  o.need(hus, "HUS >= HSU with and without CSIT");
  o.need(csit, "CSIT >= no CSIT for HSU, HUS and HU");
  const auto& last = rows.back();
  o.need(last.beta1 == 1.0 && last.usCsit == last.sCsit && last.usNoCsit == last.sNoCsit,
         "HUS == HSU at beta1 = 1 for both CSIT cases");
  return o;
}

Outcome queue() {
  Outcome o;
  SlotConfig c;
  c.n = 10;
  c.harvest = experiments::example1Harvest();
  const double b = stabilityBoundary(c.harvest, c.n, 1.0);
  o.need(std::abs(b - 5.0 * std::log2(1.0 + 0.0625)) < 1e-14, "boundary B = " + num(b));
  for (double f : {0.8, 1.2}) {
    c.arrivals = twoPointArrivals(f * b);
    int agree = 0;
    for (std::uint64_t seed = 0; seed < 5; ++seed)
      agree += simulateQueueSystem(c, 1000000, RngStream(seed, 0)).verdict == (f < 1 ? Verdict::stable : Verdict::unstable);
    o.need(agree == 5, num(f) + "B: " + std::to_string(agree) + "/5 " + (f < 1 ? "stable" : "unstable"));
  }
  return o;
}

Outcome finiteBuffer() {
  Outcome o;
  std::ifstream in(std::string(EHCAP_SOURCE_DIR) + "/data/table1.csv");
  const auto table = readHarvestTable(in);
  std::vector<DiscreteDist> rows;
  for (int i : {1, 2, 5, 10}) rows.push_back(table[i].harvest);
  const auto res = fig8Sweep(15, rows, kCh, RngStream(0, 0));
  for (const auto& r : res) {
    const std::string at = "E[Y]=" + num(r.meanY) + ": ";
    o.need(r.noBuffer - 2 * r.greedySe <= r.greedy, at + "no buffer " + num(r.noBuffer) + " <= greedy " + num(r.greedy));
    o.need(r.greedy <= r.optimized + 2 * r.optimizedSe, at + "greedy <= optimized " + num(r.optimized));
    o.need(r.optimized <= r.infinite + 2 * r.optimizedSe, at + "optimized <= infinite " + num(r.infinite));
  }
  const auto& hi = res.back();
  const auto& lo = res.front();
  o.need(std::abs(hi.greedy - hi.optimized) <= 0.05 * hi.optimized, "greedy within 5% of optimized at E[Y]=9.91");
  o.need(lo.optimized >= 0.9 * lo.infinite, "optimized within 10% of infinite buffer at E[Y]=1.01: " +
                                                num(lo.optimized / lo.infinite));
  return o;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

Outcome determinism() {
  Outcome o;
  const fs::path cfgDir = fs::path(EHCAP_SOURCE_DIR) / "configs";
  const fs::path root = fs::temp_directory_path() / "ehcap_acceptance";
  for (const char* name : {"theorem1", "fig3", "fig4", "fig6", "fig7", "fig8", "stability", "custom"}) {
    auto cfg = loadConfig(cfgDir / (std::string(name) + ".json"));
    if (std::string(name) == "fig8") {
      // Two rows keep the double run affordable; the code path is the full one.
      cfg["rows"] = {1, 10};
      cfg["spsaIters"] = 10;
    }
    std::string outs[2];
    nlohmann::json man[2];
    for (int k = 0; k < 2; ++k) {
      RunOptions opt;
      opt.outDir = root / (std::string(name) + "_" + std::to_string(k));
      fs::remove_all(opt.outDir);
      opt.quiet = true;
      opt.configDir = cfgDir;
      const auto r = runExperiment(cfg, opt);
      for (const auto& f : r.manifest.at("outputs"))
        if (f != "manifest.json") outs[k] += f.get<std::string>() + "\n" + slurp(opt.outDir / f.get<std::string>());
      man[k] = nlohmann::json::parse(slurp(opt.outDir / "manifest.json"));
      man[k].erase("wallTimeSec");
    }
    o.need(!outs[0].empty() && outs[0] == outs[1] && man[0] == man[1],
           std::string(name) + ": outputs bit-identical (" + std::to_string(outs[0].size()) + " bytes)");
  }
  fs::remove_all(root);
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* title;
    double budgetSec;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> all = {
      {1, "truncated Gaussian signalling reaches the ideal capacity", 30, theorem1},
      {2, "water-filling exactness", 1, waterfilling},
      {3, "peak-capacity certificate", 60, peak},
      {4, "sleep-wake curve properties", 600, sleepWake},
      {5, "storage architectures", 300, storage},
      {6, "fading storage architectures", 600, fading},
      {7, "queue stability phase", 120, queue},
      {8, "finite-buffer sandwich", 1800, finiteBuffer},
      {9, "determinism", 1800, determinism},
  };
  int failed = 0;
  for (const auto& c : all) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.need(false, std::string("threw: ") + e.what());
    }
    const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    o.need(sec < c.budgetSec, "runtime " + num(sec) + " s < " + num(c.budgetSec) + " s");
    if (!o.pass) ++failed;
    std::printf("%s  criterion %d: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", c.id, c.title, sec);
    for (const auto& n : o.notes) std::printf("        %s\n", n.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(all.size()) - failed, all.size());
  return failed;
}
