#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "commands.hpp"
#include "config.hpp"
#include "vmpfc/error.hpp"
#include "vmpfc/io.hpp"

using namespace vmpfc;
using namespace vmpfc::cli;
namespace fs = std::filesystem;

namespace {

RunConfig from_text(const std::string& text, const std::vector<std::string>& sets = {}) {
  ConfigDocument d = ConfigDocument::parse(text, "test");
  for (const auto& s : sets) d.set(s);
  return resolve(d);
}

std::string config_key_of(const std::string& text) {
  try {
    from_text(text);
  } catch (const ConfigError& e) {
    return e.key();
  }
  return "";
}

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("vmpfc_test_cli_" + name);
  fs::remove_all(p);
  return p;
}

struct Captured {
  std::ostringstream out, err;
  CommandContext ctx(const fs::path& dir) {
    CommandContext c;
    c.out_dir = dir;
    c.out = &out;
    c.err = &err;
    return c;
  }
};

int run_exe(const std::string& args) {
  const std::string cmd = std::string(VMPFC_CLI_EXE) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

}  // namespace

TEST(Config, MinimalFillsDefaults) {
  RunConfig c = from_text("[grid]\ndim = 2\nn = 32\nL = 64\n[model]\nepsilon = 0.5\n");
  EXPECT_EQ(c.n, (std::vector<int>{32, 32}));
  EXPECT_EQ(c.length, (std::vector<double>{64, 64}));
  EXPECT_EQ(c.model.epsilon, 0.5);
  EXPECT_EQ(c.scheme_params.sav_b, 1e4);
  EXPECT_EQ(c.scheme_params.gpav_c0, 1e3);
  EXPECT_EQ(c.scheme_params.esav_c, 1e8);
  EXPECT_EQ(c.record_every, 10);
  EXPECT_EQ(c.scheme, SchemeKind::kSav);
  EXPECT_TRUE(std::holds_alternative<RandomPerturbation>(c.initial));
}

TEST(Config, DtMinAboveDtMaxNamesBothKeys) {
  const std::string key = config_key_of("[adaptive]\ndt_min = 3\ndt_max = 2\n");
  EXPECT_NE(key.find("adaptive.dt_min"), std::string::npos);
  EXPECT_NE(key.find("adaptive.dt_max"), std::string::npos);
}

TEST(Config, Errors) {
  EXPECT_EQ(config_key_of("[model]\nalhpa = 1\n"), "model.alhpa");
  EXPECT_EQ(config_key_of("[model]\nalpha = \"big\"\n"), "model.alpha");
  EXPECT_EQ(config_key_of("[model]\nmobility = -1\n"), "model");
  EXPECT_EQ(config_key_of("[grid]\nn = [32, 32, 32]\n"), "grid.n");
  EXPECT_EQ(config_key_of("[scheme]\nkind = \"bdf\"\n"), "scheme.kind");
  EXPECT_EQ(config_key_of("[initial]\ntype = \"file\"\n"), "initial.path");
  EXPECT_EQ(config_key_of("[run]\nrecord_every = 1.5\n"), "run.record_every");
  EXPECT_EQ(config_key_of("[converge]\ndt_list = [0.1, 0.2, 0.05]\n"), "converge.dt_list");
  EXPECT_EQ(config_key_of("[model]\nalpha = 1\nalpha = 2\n"), "model.alpha");
  EXPECT_EQ(config_key_of("top = 1\n"), "top");
  EXPECT_THROW(ConfigDocument::parse("[model\n", "x"), ConfigError);
  EXPECT_THROW(ConfigDocument::parse("[model]\njunk\n", "x"), ConfigError);
}

TEST(Config, SyntaxDetails) {
  RunConfig c = from_text(
      "# comment\n[grid]\nn = [16, 32]   # trailing\nL = [10.0, 20.0]\n\n[scheme]\nkind = \"sesav\"\nC = 1_000\n"
      "[run]\nsnapshot_times = [5, 1]\ncheck_residual = true\n[compare]\ncontrollers = [\"legacy\"]\n");
  EXPECT_EQ(c.n, (std::vector<int>{16, 32}));
  EXPECT_EQ(c.scheme, SchemeKind::kEsav);
  EXPECT_EQ(c.scheme_params.esav_c, 1000.0);
  EXPECT_EQ(c.snapshot_times, (std::vector<double>{1, 5}));
  EXPECT_TRUE(c.check_residual);
  ASSERT_EQ(c.controllers.size(), 1u);
  EXPECT_EQ(c.controllers[0], ControllerKind::kLegacy);
}

TEST(Config, SetOverrides) {
  RunConfig c = from_text("[model]\nh_vac = 10\n", {"model.h_vac=3000", "scheme.kind=sgpav", "run.T=0"});
  EXPECT_EQ(c.model.h_vac, 3000);
  EXPECT_EQ(c.scheme, SchemeKind::kGpav);
  EXPECT_EQ(c.T, 0.0);
  ConfigDocument d;
  EXPECT_THROW(d.set("no_equals"), ConfigError);
}

TEST(Config, EnergyStabilityFileParses) {
  RunConfig c = load_config(fs::path(VMPFC_CONFIG_DIR) / "energy_stability.toml", {});
  EXPECT_EQ(c.model.epsilon, 0.9);
  EXPECT_EQ(c.model.alpha, 0.01);
  EXPECT_EQ(c.model.beta, 1.0);
  EXPECT_EQ(c.model.mobility, 1.0);
  EXPECT_EQ(c.model.h_vac, 5000);
  EXPECT_EQ(c.scheme_params.stab_s, 100);
  EXPECT_EQ(c.T, 400);
  EXPECT_EQ(c.length, (std::vector<double>{128, 128}));
  EXPECT_EQ(c.n, (std::vector<int>{128, 128}));
  const auto& rp = std::get<RandomPerturbation>(c.initial);
  EXPECT_EQ(rp.mean, 0.06);
  EXPECT_EQ(rp.amplitude, 0.001);
}

TEST(Config, ShippedFilesParse) {
  for (const auto& e : fs::directory_iterator(VMPFC_CONFIG_DIR)) {
    if (e.path().extension() == ".toml") EXPECT_NO_THROW(load_config(e.path(), {})) << e.path();
  }
}

TEST(Info, ZeroStateReportsU0) {
  Captured cap;
  RunConfig c = from_text("[grid]\nn = 16\n[initial]\nmean = 0\namplitude = 0\n");
  EXPECT_EQ(cmd_info(c, cap.ctx("unused")), kExitOk);
  EXPECT_NE(cap.out.str().find("u0 = 100\n"), std::string::npos) << cap.out.str();
}

TEST(Info, SmallCSuggestsInitialEnergy) {
  Captured cap;
  RunConfig c = from_text("[grid]\nn = 16\n[initial]\nmean = 0.5\n[scheme]\nC = 1e-3\n");
  EXPECT_EQ(cmd_info(c, cap.ctx("unused")), kExitOk);
  EXPECT_NE(cap.out.str().find("use C >= "), std::string::npos) << cap.out.str();
}

TEST(Info, CrystalConfigListsOrientations) {
  Captured cap;
  RunConfig c = load_config(fs::path(VMPFC_CONFIG_DIR) / "crystal_growth.toml", {"grid.n=64"});
  EXPECT_EQ(cmd_info(c, cap.ctx("unused")), kExitOk);
  const std::string s = cap.out.str();
  EXPECT_NE(s.find("patch 0: theta = 0 deg"), std::string::npos);
  EXPECT_NE(s.find("patch 1: theta = -45 deg"), std::string::npos);
  EXPECT_NE(s.find("patch 2: theta = 45 deg"), std::string::npos);
}

TEST(Run, ZeroHorizonSingleRow) {
  const fs::path dir = scratch("zero");
  Captured cap;
  RunConfig c = from_text("[grid]\nn = 16\n[run]\nT = 0\nsnapshot_times = [0]\n");
  ASSERT_EQ(cmd_run(c, cap.ctx(dir)), kExitOk);
  EXPECT_EQ(read_series_csv(dir / "series.csv").size(), 1u);
  EXPECT_TRUE(fs::exists(dir / "phi_t0.f64"));
  EXPECT_TRUE(fs::exists(dir / "phi_t0.json"));
  EXPECT_FALSE(fs::exists(dir / ".vmpfc.lock"));
}

TEST(Run, SnapshotsAndMonotoneEnergy) {
  const fs::path dir = scratch("energy");
  Captured cap;
  RunConfig c = load_config(fs::path(VMPFC_CONFIG_DIR) / "energy_stability.toml",
                            {"grid.n=32", "run.T=5", "run.record_every=1", "run.snapshot_times=[2.5, 5]",
                             "run.check_residual=true"});
  ASSERT_EQ(cmd_run(c, cap.ctx(dir)), kExitOk) << cap.err.str();
  auto rows = read_series_csv(dir / "series.csv");
  EXPECT_EQ(rows.size(), 51u);
  for (std::size_t i = 1; i < rows.size(); ++i) EXPECT_LE(rows[i].e_discrete, rows[i - 1].e_discrete);
  Snapshot s = read_snapshot(dir / "phi_t2.5.f64");
  EXPECT_NEAR(s.meta.t, 2.5, 1e-12);
  EXPECT_TRUE(fs::exists(dir / "phi_t5.f64"));
}

TEST(Run, NumericalFailureWritesErrorFile) {
  const fs::path dir = scratch("fail");
  Captured cap;
  RunConfig c = from_text("[grid]\nn = 32\n[model]\nepsilon = 0.9\nh_vac = 5000\n"
                          "[scheme]\nkind = \"sgpav\"\nS = 0\ndt = 0.5\n[run]\nT = 200\n");
  EXPECT_EQ(cmd_run(c, cap.ctx(dir)), kExitNumerical);
  EXPECT_TRUE(fs::exists(dir / "error.txt"));
  EXPECT_TRUE(fs::exists(dir / "series.csv"));
}

TEST(Run, LockedDirectoryIsIoError) {
  const fs::path dir = scratch("locked");
  fs::create_directories(dir);
  OutputLock held(dir);
  Captured cap;
  RunConfig c = from_text("[grid]\nn = 16\n[run]\nT = 0\n");
  EXPECT_THROW(cmd_run(c, cap.ctx(dir)), IoError);
}

TEST(Converge, SmokeWritesTable) {
  const fs::path dir = scratch("converge");
  Captured cap;
  RunConfig c = load_config(fs::path(VMPFC_CONFIG_DIR) / "converge_sav.toml",
                            {"grid.n=32", "converge.dt_list=[0.025, 0.0125, 0.00625]"});
  EXPECT_EQ(cmd_converge(c, cap.ctx(dir)), kExitOk);
  std::ifstream in(dir / "convergence.csv");
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "dt,error,rate");
  int finite_rates = 0, rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    if (std::isfinite(std::stod(line.substr(line.rfind(',') + 1)))) ++finite_rates;
  }
  EXPECT_EQ(rows, 3);
  EXPECT_EQ(finite_rates, 2);

  Captured cap2;
  c.rate_min = 3.0;
  c.rate_max = 4.0;
  EXPECT_EQ(cmd_converge(c, cap2.ctx(dir)), kExitVerification);
}

TEST(AdaptCompare, SummaryAndSeries) {
  const fs::path dir = scratch("compare");
  Captured cap;
  RunConfig c = load_config(fs::path(VMPFC_CONFIG_DIR) / "adaptive_compare.toml",
                            {"grid.n=32", "run.T=2", "compare.fixed_dt=0.1"});
  ASSERT_EQ(cmd_adapt_compare(c, cap.ctx(dir)), kExitOk) << cap.err.str();
  std::ifstream in(dir / "summary.csv");
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "controller,steps,wall_seconds");
  std::vector<std::string> labels;
  while (std::getline(in, line)) {
    labels.push_back(line.substr(0, line.find(',')));
    const std::string wall = line.substr(line.rfind(',') + 1);
    EXPECT_EQ(wall.size() - wall.find('.') - 1, 3u) << line;
  }
  EXPECT_EQ(labels, (std::vector<std::string>{"evma", "legacy", "fixed"}));
  for (const auto& l : labels) EXPECT_TRUE(fs::exists(dir / ("series_" + l + ".csv")));

  Captured v;
  SeriesCheckOptions so;
  so.ratio_max = 1.5;
  // the CN energy law only telescopes at constant dt, so adaptive series are checked for mass and ratios
  so.check_energy = false;
  EXPECT_EQ(cmd_verify_series(dir / "series_evma.csv", so, v.ctx(dir)), kExitOk) << v.err.str();
}

TEST(VerifySeries, DetectsViolations) {
  const fs::path dir = scratch("verify");
  fs::create_directories(dir);
  std::vector<TimeSeriesRecord> rows(4);
  for (int i = 0; i < 4; ++i) {
    rows[i].t = i;
    rows[i].dt = i == 0 ? 0 : 1;
    rows[i].mass = 5;
    rows[i].e_modified = 10 - i;
  }
  rows[2].mass = 5.001;
  write_series_csv(dir / "s.csv", rows);
  Captured cap;
  EXPECT_EQ(cmd_verify_series(dir / "s.csv", {}, cap.ctx(dir)), kExitVerification);
  EXPECT_NE(cap.err.str().find("mass drift"), std::string::npos);
}

TEST(Exe, ExitCodes) {
  const fs::path dir = scratch("exe");
  EXPECT_EQ(run_exe("--help"), kExitOk);
  EXPECT_EQ(run_exe("frobnicate"), kExitUsage);
  EXPECT_EQ(run_exe("info --set grid.n=16 --set model.bogus=1"), kExitConfig);
  EXPECT_EQ(run_exe("info --set grid.n=16"), kExitOk);
  EXPECT_EQ(run_exe("verify-series " + (dir / "nope.csv").string()), kExitIo);
  EXPECT_EQ(run_exe("run --set grid.n=16 --set run.T=0 --out " + dir.string()), kExitOk);
  EXPECT_EQ(run_exe("verify-series " + (dir / "series.csv").string()), kExitOk);
  EXPECT_EQ(run_exe("run --set grid.n=32 --set model.epsilon=0.9 --set model.h_vac=5000 --set scheme.kind=sgpav "
                    "--set scheme.S=0 --set scheme.dt=0.5 --set run.T=200 --out " +
                    dir.string()),
            kExitNumerical);
  fs::path blocker = dir / "file";
  std::ofstream(blocker) << "x";
  EXPECT_EQ(run_exe("run --set grid.n=16 --set run.T=0 --out " + (blocker / "sub").string()), kExitIo);
}
