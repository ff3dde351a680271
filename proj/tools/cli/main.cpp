#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "commands.hpp"
#include "config.hpp"
#include "vmpfc/error.hpp"

using namespace vmpfc::cli;

namespace {

int default_threads() {
  if (const char* env = std::getenv("VMPFC_THREADS")) {
    try {
      const int n = std::stoi(env);
      if (n >= 1) return n;
    } catch (const std::exception&) {
    }
    std::cerr << "ignoring VMPFC_THREADS='" << env << "'\n";
  }
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"VMPFC solver: stabilized SAV/GPAV/ESAV Crank-Nicolson schemes with adaptive stepping"};
  app.require_subcommand(1);
  app.fallthrough();

  std::optional<std::string> config_path;
  std::vector<std::string> overrides;
  std::string out_dir = "out";
  int threads = default_threads();
  app.add_option("--config", config_path, "config file (TOML subset)")->check(CLI::ExistingFile);
  app.add_option("--set", overrides, "override one key, e.g. --set model.h_vac=3000")->allow_extra_args(false);
  app.add_option("--out", out_dir, "output directory")->capture_default_str();
  app.add_option("--threads", threads, "worker threads (default $VMPFC_THREADS or 1)")->check(CLI::PositiveNumber);

  auto* run = app.add_subcommand("run", "integrate one configuration and write series.csv and snapshots");
  auto* converge = app.add_subcommand("converge", "manufactured-solution convergence study, writes convergence.csv");
  auto* compare = app.add_subcommand("adapt-compare", "compare adaptive controllers, writes summary.csv");
  auto* info = app.add_subcommand("info", "print resolved parameters and initial diagnostics");
  auto* verify = app.add_subcommand("verify-series", "replay run invariants over a series file");

  std::string csv;
  vmpfc::SeriesCheckOptions check;
  bool no_energy = false;
  verify->add_option("csv", csv, "series file")->required();
  verify->add_option("--ratio-max", check.ratio_max, "step ratio bound, 0 disables")->capture_default_str();
  verify->add_option("--mass-tol", check.mass_tolerance, "relative mass tolerance")->capture_default_str();
  verify->add_option("--energy-slack", check.energy_slack, "allowed relative energy increase")->capture_default_str();
  verify->add_flag("--no-energy", no_energy, "skip the energy check");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  CommandContext ctx;
  ctx.out_dir = out_dir;
  ctx.threads = threads;
  ctx.out = &std::cout;
  ctx.err = &std::cerr;

  try {
    if (verify->parsed()) {
      check.check_energy = !no_energy;
      return cmd_verify_series(csv, check, ctx);
    }
    const RunConfig cfg = load_config(config_path, overrides);
    for (const auto& w : cfg.warnings) std::cerr << "warning: " << w << '\n';
    if (run->parsed()) return cmd_run(cfg, ctx);
    if (converge->parsed()) return cmd_converge(cfg, ctx);
    if (compare->parsed()) return cmd_adapt_compare(cfg, ctx);
    if (info->parsed()) return cmd_info(cfg, ctx);
  } catch (const vmpfc::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    const auto [code, label] = classify(std::current_exception());
    std::cerr << label << ": " << e.what() << '\n';
    return code;
  }
  return kExitUsage;
}
