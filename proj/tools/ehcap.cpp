#include <cstdio>
#include <iostream>

#include "CLI11.hpp"
#include "ehcap/experiment.hpp"

namespace {

ehcap::RunOptions options(const std::string& config, const std::string& out, const std::optional<std::uint64_t>& seed,
                          const std::optional<std::int64_t>& steps, bool quiet) {
  ehcap::RunOptions o;
  o.outDir = out;
  o.seed = seed;
  o.steps = steps;
  o.quiet = quiet;
  o.configDir = std::filesystem::path(config).parent_path();
  if (o.configDir.empty()) o.configDir = ".";
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Energy-harvesting channel capacity experiments"};
  app.require_subcommand(1);
  std::string config, out = "out";
  std::optional<std::uint64_t> seed;
  std::optional<std::int64_t> steps;
  bool quiet = false;

  auto* run = app.add_subcommand("run", "Run an experiment config and write CSV, SVG and manifest");
  run->add_option("config", config, "Experiment config (JSON)")->required();
  run->add_option("--out", out, "Output directory")->capture_default_str();
  run->add_option("--seed", seed, "Override the config seed");
  run->add_option("--steps", steps, "Override the run length")->check(CLI::PositiveNumber);
  run->add_flag("--quiet", quiet, "Suppress progress and warnings");

  auto* val = app.add_subcommand("validate", "Parse and check a config without running it");
  val->add_option("config", config, "Experiment config (JSON)")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    const nlohmann::json cfg = ehcap::loadConfig(config);
    if (val->parsed()) {
      const auto rep = ehcap::validateConfig(cfg, options(config, out, seed, steps, true));
      for (const auto& w : rep.warnings) std::printf("warning: %s\n", w.c_str());
      for (const auto& e : rep.errors) std::printf("error: %s\n", e.c_str());
      if (rep.ok) std::printf("ok\n");
      return rep.ok ? 0 : 2;
    }
    const auto res = ehcap::runExperiment(cfg, options(config, out, seed, steps, quiet));
    if (!quiet) {
      for (const auto& a : res.manifest.at("assertions"))
        std::printf("%s  %s\n", a.at("passed").get<bool>() ? "PASS" : "FAIL", a.at("name").get<std::string>().c_str());
      std::printf("wrote %s/manifest.json\n", out.c_str());
    }
    return res.passed ? 0 : 1;
  } catch (const ehcap::ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    std::fprintf(stderr, "usage: ehcap run <config.json> [--out DIR] [--seed N] [--steps N] [--quiet]\n"
                         "       ehcap validate <config.json>\n");
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
}
