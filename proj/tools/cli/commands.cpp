#include "commands.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>

#include "vmpfc/error.hpp"
#include "vmpfc/io.hpp"
#include "vmpfc/sim.hpp"

namespace vmpfc::cli {

namespace {

constexpr double kResidualLimit = 1e-8;
constexpr double kEnergySlack = 1e-9;

void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    throw IoError("cannot create output directory '" + dir.string() + "': " + ec.message());
  }
}

std::string what_of(const std::exception_ptr& e) {
  try {
    std::rethrow_exception(e);
  } catch (const std::exception& ex) {
    return ex.what();
  } catch (...) {
    return "unknown error";
  }
}

void write_error(const std::filesystem::path& path, const std::exception_ptr& e) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write '" + path.string() + "'");
  f << classify(e).second << ": " << what_of(e) << '\n';
}

// Writes snapshots as the run passes each requested time, checks residuals
// and energy decay on request.
class RunMonitor {
 public:
  RunMonitor(const RunConfig& cfg, const std::filesystem::path& dir, const Forcing& forcing)
      : cfg_(cfg), dir_(dir), forcing_(forcing) {}

  void initial(const SchemeState& s) {
    while (next_ < cfg_.snapshot_times.size() && cfg_.snapshot_times[next_] <= 0.0) write(s, cfg_.snapshot_times[next_++]);
  }

  void operator()(const SchemeState& before, const StepReport& rep) {
    const SchemeState& after = rep.state;
    if (cfg_.check_residual) {
      SchemeParams sp = cfg_.scheme_params;
      sp.stab_s = after.current_s;
      const bool bootstrap = before.step_index == 0 || (cfg_.first_order && cfg_.mode == TimeMode::kFixed);
      if (bootstrap) sp.dt = rep.dt_used;
      const double r = scheme_residual(cfg_.scheme, bootstrap, before, after, cfg_.model, sp, rep.dt_used, forcing_);
      if (!(r <= kResidualLimit)) {
        std::ostringstream os;
        os << "step " << after.step_index << ": scheme residual " << r << " exceeds " << kResidualLimit;
        throw NumericalFailure(os.str());
      }
    }
    if (cfg_.assert_energy && !forcing_) check_energy(before, after);
    const double t = after.t;
    while (next_ < cfg_.snapshot_times.size() && cfg_.snapshot_times[next_] <= t + 1e-9 * rep.dt_used) {
      write(after, cfg_.snapshot_times[next_++]);
    }
  }

  // Snapshot times past the end of the run are taken from the final state.
  void finish(const SchemeState& s) {
    while (next_ < cfg_.snapshot_times.size() && cfg_.snapshot_times[next_] <= cfg_.T) write(s, cfg_.snapshot_times[next_++]);
  }

 private:
  void check_energy(const SchemeState& before, const SchemeState& after) const {
    double e0 = 0.0;
    double e1 = 0.0;
    if (cfg_.scheme == SchemeKind::kSav) {
      e0 = discrete_energy_cn(before, cfg_.model, after.current_s);
      e1 = discrete_energy_cn(after, cfg_.model, after.current_s);
    } else {
      e0 = modified_energy(cfg_.scheme, before, cfg_.model, cfg_.scheme_params);
      e1 = modified_energy(cfg_.scheme, after, cfg_.model, cfg_.scheme_params);
    }
    if (e1 > e0 + kEnergySlack * std::max(1.0, std::abs(e0))) {
      std::ostringstream os;
      os << std::setprecision(17) << "step " << after.step_index << ": energy increased from " << e0 << " to " << e1;
      throw NumericalFailure(os.str());
    }
  }

  void write(const SchemeState& s, double requested) {
    // the file name carries the requested time, the sidecar the actual one
    const auto path = write_snapshot(dir_, s.phi_n, s.t, to_string(cfg_.scheme));
    const auto wanted = dir_ / ("phi_t" + snapshot_tag(requested) + ".f64");
    if (path != wanted) {
      std::filesystem::rename(path, wanted);
      auto json = path;
      auto json_wanted = wanted;
      std::filesystem::rename(json.replace_extension(".json"), json_wanted.replace_extension(".json"));
    }
  }

  const RunConfig& cfg_;
  std::filesystem::path dir_;
  Forcing forcing_;
  std::size_t next_ = 0;
};

RunResult run_one(const RunConfig& cfg, const RealField& phi0, const RealField& psi0, const Forcing& forcing,
                  const StepObserver& observer) {
  if (cfg.mode == TimeMode::kAdaptive) {
    if (forcing) throw ConfigError("run.forcing", "forcing is only supported with run.mode = \"fixed\"");
    AdaptiveRunOptions o;
    o.T = cfg.T;
    o.controller = cfg.controller;
    o.monitored = cfg.monitored;
    o.record_every = cfg.record_every;
    o.observer = observer;
    return run_adaptive(cfg.scheme, phi0, psi0, cfg.model, cfg.scheme_params, cfg.adaptive, o);
  }
  FixedRunOptions o;
  o.T = cfg.T;
  o.record_every = cfg.record_every;
  o.forcing = forcing;
  o.first_order_only = cfg.first_order;
  o.observer = observer;
  return run_fixed(cfg.scheme, phi0, psi0, cfg.model, cfg.scheme_params, o);
}

std::string fmt(double v, int precision = 6) {
  std::ostringstream os;
  os << std::setprecision(precision) << v;
  return os.str();
}

}  // namespace

std::pair<int, std::string> classify(const std::exception_ptr& e) {
  try {
    std::rethrow_exception(e);
  } catch (const ConfigError&) {
    return {kExitConfig, "config error"};
  } catch (const ShiftTooSmall&) {
    return {kExitConfig, "shift too small"};
  } catch (const ScalingError&) {
    return {kExitConfig, "scaling error"};
  } catch (const ContractViolation&) {
    return {kExitConfig, "invalid parameters"};
  } catch (const IoError&) {
    return {kExitIo, "i/o error"};
  } catch (const SolvabilityError&) {
    return {kExitNumerical, "solvability error"};
  } catch (const SingularOperator&) {
    return {kExitNumerical, "singular operator"};
  } catch (const MeanViolation&) {
    return {kExitNumerical, "mean violation"};
  } catch (const NumericalFailure&) {
    return {kExitNumerical, "numerical failure"};
  } catch (const std::filesystem::filesystem_error&) {
    return {kExitIo, "i/o error"};
  } catch (const Error&) {
    return {kExitNumerical, "error"};
  } catch (...) {
    return {kExitNumerical, "internal error"};
  }
}

OutputLock::OutputLock(const std::filesystem::path& dir) : path_(dir / ".vmpfc.lock") {
  const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
  if (fd < 0) {
    if (errno == EEXIST) {
      throw IoError("output directory '" + dir.string() + "' is locked by another run (remove " + path_.string() +
                    " if stale)");
    }
    throw IoError("cannot create lockfile '" + path_.string() + "': " + std::strerror(errno));
  }
  const std::string pid = std::to_string(::getpid()) + "\n";
  [[maybe_unused]] const auto n = ::write(fd, pid.data(), pid.size());
  ::close(fd);
}

OutputLock::~OutputLock() {
  std::error_code ec;
  std::filesystem::remove(path_, ec);
}

int cmd_run(const RunConfig& cfg, const CommandContext& ctx) {
  const GridPtr grid = cfg.make_grid();
  const auto [phi0, psi0] = build_initial(cfg.initial, grid);
  const Forcing forcing = cfg.manufactured_forcing ? manufactured_forcing(cfg.model) : Forcing{};

  ensure_dir(ctx.out_dir);
  OutputLock lock(ctx.out_dir);

  RunMonitor monitor(cfg, ctx.out_dir, forcing);
  std::exception_ptr failure;
  std::optional<RunResult> result;
  try {
    monitor.initial(initial_state(cfg.scheme, phi0, psi0, cfg.model, cfg.scheme_params));
    result = run_one(cfg, phi0, psi0, forcing, [&monitor](const SchemeState& b, const StepReport& r) { monitor(b, r); });
    failure = result->failure;
    if (!failure) monitor.finish(result->state);
  } catch (const Error&) {
    failure = std::current_exception();
  }

  if (result) write_series_csv(ctx.out_dir / "series.csv", result->records);
  if (failure) {
    write_error(ctx.out_dir / "error.txt", failure);
    const auto [code, label] = classify(failure);
    *ctx.err << label << ": " << what_of(failure) << '\n';
    return code;
  }
  std::error_code ec;
  std::filesystem::remove(ctx.out_dir / "error.txt", ec);

  const auto& last = result->records.back();
  *ctx.out << "steps " << result->steps << ", t = " << fmt(last.t, 10) << ", mass = " << fmt(last.mass, 17)
           << ", energy = " << fmt(last.e_original, 10) << "\n"
           << "wrote " << (ctx.out_dir / "series.csv").string() << " (" << result->records.size() << " rows)\n";
  return kExitOk;
}

int cmd_converge(const RunConfig& cfg, const CommandContext& ctx) {
  const GridPtr grid = cfg.make_grid();
  ensure_dir(ctx.out_dir);
  OutputLock lock(ctx.out_dir);

  ConvergenceOptions o;
  o.T = cfg.converge_T;
  o.first_order_only = cfg.first_order;
  o.threads = ctx.threads;
  ConvergenceResult res;
  try {
    res = convergence_study(cfg.scheme, grid, cfg.model, cfg.scheme_params, cfg.dt_list, o);
  } catch (const Error&) {
    write_error(ctx.out_dir / "error.txt", std::current_exception());
    throw;
  }

  const auto path = ctx.out_dir / "convergence.csv";
  std::ofstream f(path);
  if (!f) throw IoError("cannot write '" + path.string() + "'");
  f << "dt,error,rate\n";
  for (const auto& row : res.rows) {
    f << format_double(row.dt) << ',' << format_double(row.error) << ',' << format_double(row.rate) << '\n';
  }
  f.close();
  if (!f) throw IoError("write failed for '" + path.string() + "'");

  // rows whose error exceeds 1 or whose local rate leaves the bounds are flagged
  auto off = [&](const ConvergenceRow& row) {
    return row.error > 1.0 || (!std::isnan(row.rate) && !(row.rate >= cfg.rate_min && row.rate <= cfg.rate_max));
  };
  *ctx.out << std::setw(14) << "dt" << std::setw(16) << "error" << std::setw(10) << "rate" << '\n';
  std::size_t flagged = 0;
  for (const auto& row : res.rows) {
    *ctx.out << std::setw(14) << fmt(row.dt) << std::setw(16) << fmt(row.error) << std::setw(10)
             << (std::isnan(row.rate) ? std::string("-") : fmt(row.rate, 4));
    if (off(row)) {
      *ctx.out << "  *";
      ++flagged;
    }
    *ctx.out << '\n';
  }
  if (flagged > 0) *ctx.out << "* pre-asymptotic: error above 1 or local rate outside the bounds\n";
  *ctx.out << "fitted rate " << fmt(res.fitted_rate, 4) << " (rows " << res.fit_begin << ".." << res.rows.size() - 1
           << "), bounds [" << cfg.rate_min << ", " << cfg.rate_max << "]\n";
  if (!res.monotone) *ctx.out << "warning: errors are not monotone in dt\n";

  if (!(res.fitted_rate >= cfg.rate_min && res.fitted_rate <= cfg.rate_max)) {
    *ctx.err << "fitted rate " << fmt(res.fitted_rate, 4) << " outside [" << cfg.rate_min << ", " << cfg.rate_max
             << "]\n";
    return kExitVerification;
  }
  return kExitOk;
}

int cmd_adapt_compare(const RunConfig& cfg, const CommandContext& ctx) {
  const GridPtr grid = cfg.make_grid();
  const auto [phi0, psi0] = build_initial(cfg.initial, grid);
  ensure_dir(ctx.out_dir);
  OutputLock lock(ctx.out_dir);

  AdaptCompareSetup setup;
  setup.kind = cfg.scheme;
  setup.model = cfg.model;
  setup.scheme = cfg.scheme_params;
  setup.adaptive = cfg.adaptive;
  setup.T = cfg.T;
  setup.controllers = cfg.controllers;
  setup.fixed_dt = cfg.fixed_dt;
  setup.record_every = cfg.record_every;
  setup.threads = ctx.threads;
  const auto entries = adapt_compare(setup, phi0, psi0);

  int code = kExitOk;
  std::ostringstream summary;
  summary << "controller,steps,wall_seconds\n";
  for (const auto& e : entries) {
    write_series_csv(ctx.out_dir / ("series_" + e.label + ".csv"), e.result.records);
    summary << e.label << ',' << e.result.steps << ',' << std::fixed << std::setprecision(3) << e.result.wall_seconds
            << std::defaultfloat << '\n';
    *ctx.out << std::left << std::setw(8) << e.label << std::right << " steps " << std::setw(8) << e.result.steps
             << "  wall " << std::fixed << std::setprecision(3) << e.result.wall_seconds << " s" << std::defaultfloat
             << std::setprecision(6) << '\n';
    if (!e.result.ok()) {
      write_error(ctx.out_dir / ("error_" + e.label + ".txt"), e.result.failure);
      const auto [c, label] = classify(e.result.failure);
      *ctx.err << e.label << ": " << label << ": " << what_of(e.result.failure) << '\n';
      code = std::max(code, c);
    }
  }
  const auto path = ctx.out_dir / "summary.csv";
  std::ofstream f(path);
  if (!f) throw IoError("cannot write '" + path.string() + "'");
  f << summary.str();
  f.close();
  if (!f) throw IoError("write failed for '" + path.string() + "'");
  return code;
}

int cmd_info(const RunConfig& cfg, const CommandContext& ctx) {
  std::ostream& os = *ctx.out;
  os << describe(cfg);
  for (const auto& w : cfg.warnings) os << "warning: " << w << '\n';

  const GridPtr grid = cfg.make_grid();
  const auto [phi0, psi0] = build_initial(cfg.initial, grid);
  const ModelParams& p = cfg.model;
  const SchemeParams& sp = cfg.scheme_params;

  // smallest value of each linear operator symbol over the grid's modes
  const double dt = sp.dt;
  const double s = sp.stab_s;
  const double c_sav = 2.0 / (p.mobility * dt) * (p.alpha / dt + p.beta / 2.0);
  const double c_ratio = (p.alpha + dt * p.beta / 2.0) * (2.0 / dt);
  const double c_boot = p.alpha / dt + p.beta;
  double min_sav = std::numeric_limits<double>::infinity();
  double min_ratio = min_sav;
  double min_boot = min_sav;
  for (double k : grid->wavenumber_sq()) {
    const double l = (1.0 - k) * (1.0 - k);
    min_sav = std::min(min_sav, c_sav + 0.5 * k * l + s * k);
    min_ratio = std::min(min_ratio, c_ratio + 0.5 * dt * p.mobility * k * l + dt * p.mobility * s * k);
    min_boot = std::min(min_boot, c_boot + dt * p.mobility * (k * l + s * k));
  }
  auto verdict = [](double v) { return v > 0.0 ? "positive" : "NOT positive"; };
  os << "[operators] dt = " << dt << ", S = " << s << '\n'
     << "  SAV CN symbol min " << fmt(min_sav) << " (" << verdict(min_sav) << ")\n"
     << "  GPAV/ESAV CN symbol min " << fmt(min_ratio) << " (" << verdict(min_ratio) << ")\n"
     << "  GPAV/ESAV first-step symbol min " << fmt(min_boot) << " (" << verdict(min_boot) << ")\n";

  const double e_orig = original_energy(phi0, p);
  const double e_pseudo = pseudo_energy(phi0, psi0, p);
  const double e_nl = nonlinear_energy(phi0, p);
  double phi_min = std::numeric_limits<double>::infinity();
  for (double v : phi0.values()) phi_min = std::min(phi_min, v);
  os << "[initial state]\n  mean(phi0) = " << fmt(mean(phi0), 10) << "\n  min(phi0) = " << fmt(phi_min, 10)
     << "\n  E(phi0) = " << fmt(e_orig, 10) << "\n  pseudo energy = " << fmt(e_pseudo, 10)
     << "\n  nonlinear energy = " << fmt(e_nl, 10) << '\n';

  os << "[auxiliary variables]\n";
  try {
    os << "  u0 = " << fmt(sav_u_init(phi0, p, sp), 10) << '\n';
  } catch (const ShiftTooSmall&) {
    os << "  u0: b = " << sp.sav_b << " is too small; need b > " << fmt(-e_nl, 10) << '\n';
  }
  try {
    os << "  R0 = " << fmt(gpav_R_init(phi0, psi0, p, sp), 10) << '\n';
  } catch (const ShiftTooSmall&) {
    os << "  R0: c0 = " << sp.gpav_c0 << " is too small; need c0 > " << fmt(-e_pseudo / grid->volume(), 10) << '\n';
  }
  try {
    os << "  B0 = " << fmt(esav_B_init(phi0, psi0, p, sp), 10) << '\n';
  } catch (const ScalingError&) {
    os << "  B0: exp(E/C) overflows\n";
  }
  if (sp.esav_c < e_pseudo) {
    os << "  C = " << sp.esav_c << " is below the initial energy; use C >= " << fmt(e_pseudo, 10) << '\n';
  }
  if (p.h_vac > 0.0) {
    os << "  suggested S ~ h_vac |min phi0| = " << fmt(p.h_vac * std::abs(std::min(phi_min, 0.0)), 6) << '\n';
  }

  if (const auto* cr = std::get_if<Crystallites>(&cfg.initial)) {
    os << "[crystallites]\n";
    for (std::size_t i = 0; i < cr->patches.size(); ++i) {
      os << "  patch " << i << ": theta = " << fmt(cr->patches[i].theta * 180.0 / std::numbers::pi) << " deg\n";
    }
  }
  return kExitOk;
}

int cmd_verify_series(const std::filesystem::path& csv, const SeriesCheckOptions& opts, const CommandContext& ctx) {
  const auto rows = read_series_csv(csv);
  const SeriesCheck check = verify_series(rows, opts);
  if (check.ok) {
    *ctx.out << csv.string() << ": " << rows.size() << " rows, all invariants hold\n";
    return kExitOk;
  }
  for (const auto& p : check.problems) *ctx.err << csv.string() << ": " << p << '\n';
  return kExitVerification;
}

}  // namespace vmpfc::cli
