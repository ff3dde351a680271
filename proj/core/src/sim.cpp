#include "vmpfc/sim.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <functional>
#include <limits>
#include <mutex>
#include <thread>

#include "vmpfc/error.hpp"
#include "vmpfc/io.hpp"

namespace vmpfc {

std::uint64_t SplitMix64::next() noexcept {
  std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double SplitMix64::uniform_pm1() noexcept {
  return 2.0 * (static_cast<double>(next() >> 11) * 0x1.0p-53) - 1.0;
}

double crystal_lattice(double x_l, double y_l, double mean, double amplitude, double q) {
  const double s3 = std::sqrt(3.0);
  return mean + amplitude * (std::cos(q / s3 * y_l) * std::cos(q * x_l) - 0.5 * std::cos(2.0 * q / s3 * y_l));
}

namespace {

void check_patches(const Crystallites& c, const Grid& grid) {
  if (grid.dim() != 2) throw ConfigError("initial.patches", "crystallites need a 2D grid");
  const auto& L = grid.length();
  for (std::size_t i = 0; i < c.patches.size(); ++i) {
    const CrystalPatch& a = c.patches[i];
    const std::string key = "initial.patches[" + std::to_string(i) + "]";
    if (a.center.size() != 2) throw ConfigError(key, "center needs two coordinates");
    if (!(a.half_width > 0.0)) throw ConfigError(key, "half_width must be > 0");
    for (int ax = 0; ax < 2; ++ax) {
      if (a.center[ax] - a.half_width < 0.0 || a.center[ax] + a.half_width > L[ax]) {
        throw ConfigError(key, "patch extends outside the domain");
      }
    }
    for (std::size_t j = 0; j < i; ++j) {
      const CrystalPatch& b = c.patches[j];
      const double reach = a.half_width + b.half_width;
      if (std::abs(a.center[0] - b.center[0]) < reach && std::abs(a.center[1] - b.center[1]) < reach) {
        throw ConfigError(key, "patch overlaps patch " + std::to_string(j));
      }
    }
  }
}

struct BuildVisitor {
  const GridPtr& grid;

  RealField operator()(const RandomPerturbation& r) const {
    SplitMix64 rng(r.seed);
    RealField f(grid);
    for (double& v : f.values()) v = r.mean + r.amplitude * rng.uniform_pm1();
    return f;
  }

  RealField operator()(const Crystallites& c) const {
    check_patches(c, *grid);
    RealField f(grid, c.mean);
    double x[2];
    for (std::size_t i = 0; i < f.size(); ++i) {
      grid->coordinates(i, x);
      for (const CrystalPatch& patch : c.patches) {
        const double xt = x[0] - patch.center[0];
        const double yt = x[1] - patch.center[1];
        if (std::abs(xt) >= patch.half_width || std::abs(yt) >= patch.half_width) continue;
        const double s = std::sin(patch.theta);
        const double co = std::cos(patch.theta);
        const double x_l = xt * s + yt * co;
        const double y_l = -xt * co + yt * s;
        f[i] = crystal_lattice(x_l, y_l, c.mean, c.amplitude, c.q);
      }
    }
    return f;
  }

  RealField operator()(const Manufactured&) const { return manufactured_exact(grid, 0.0).first; }

  RealField operator()(const FromFile& file) const {
    Snapshot snap = read_snapshot(file.path);
    if (snap.meta.n != grid->n() || snap.meta.length != grid->length()) {
      throw ConfigError("initial.path", "snapshot grid does not match the configured grid");
    }
    return RealField(grid, std::move(snap.values));
  }
};

// Runs fn(0..n-1) on up to `threads` workers and rethrows the first failure.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, threads)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace

std::pair<RealField, RealField> build_initial(const InitialCondition& ic, const GridPtr& grid) {
  RealField phi0 = std::visit(BuildVisitor{grid}, ic);
  return {std::move(phi0), RealField(grid)};
}

RunResult run_fixed(SchemeKind kind, const RealField& phi0, const RealField& psi0, const ModelParams& p,
                    const SchemeParams& sp, const FixedRunOptions& opts) {
  sp.validate();
  if (!(opts.T >= 0.0)) throw ContractViolation("run_fixed: T must be >= 0");
  if (opts.record_every < 1) throw ContractViolation("run_fixed: record_every must be >= 1");

  RunResult out(initial_state(kind, phi0, psi0, p, sp));
  out.records.push_back(make_record(kind, out.state, p, sp, 0.0));
  const auto start = std::chrono::steady_clock::now();

  SchemeParams sp_step = sp;
  try {
    // step k ends at min(k dt, T); a remainder below 1e-9 dt is absorbed
    for (std::int64_t k = 1; out.state.t < opts.T; ++k) {
      double t_next = static_cast<double>(k) * sp.dt;
      if (t_next > opts.T - 1e-9 * sp.dt) t_next = opts.T;
      const double dt = t_next - out.state.t;

      StepReport rep = [&] {
        if (k == 1 || opts.first_order_only) {
          sp_step.dt = dt;
          return bootstrap_step(kind, out.state, p, sp_step, opts.forcing);
        }
        return cn_step(kind, out.state, p, sp, dt, opts.forcing);
      }();
      if (opts.observer) opts.observer(out.state, rep);
      out.state = std::move(rep.state);
      out.state.t = t_next;
      ++out.steps;
      if (k % opts.record_every == 0 || t_next >= opts.T) {
        out.records.push_back(make_record(kind, out.state, p, sp, dt));
      }
    }
  } catch (const Error&) {
    out.failure = std::current_exception();
  }
  out.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw ContractViolation("loglog_slope: need two or more points");
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double lx = std::log(x[i]);
    const double ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

ConvergenceResult convergence_study(SchemeKind kind, const GridPtr& grid, const ModelParams& p,
                                    const SchemeParams& sp_base, const std::vector<double>& dt_list,
                                    const ConvergenceOptions& opts) {
  if (dt_list.size() < 3) throw ContractViolation("convergence_study: need at least three time steps");
  for (std::size_t i = 1; i < dt_list.size(); ++i) {
    if (!(dt_list[i] < dt_list[i - 1])) throw ContractViolation("convergence_study: dt list must be descending");
  }

  const auto [phi0, psi0] = manufactured_exact(grid, 0.0);
  const RealField phi_exact = manufactured_exact(grid, opts.T).first;
  const Forcing forcing = manufactured_forcing(p);

  ConvergenceResult res;
  res.rows.resize(dt_list.size());
  parallel_for(dt_list.size(), opts.threads, [&](std::size_t i) {
    SchemeParams sp = sp_base;
    sp.dt = dt_list[i];
    FixedRunOptions fo;
    fo.T = opts.T;
    fo.record_every = std::numeric_limits<int>::max();
    fo.forcing = forcing;
    fo.first_order_only = opts.first_order_only;
    RunResult run = run_fixed(kind, phi0, psi0, p, sp, fo);
    res.rows[i].dt = dt_list[i];
    res.rows[i].error =
        run.ok() ? l2_norm(run.state.phi_n - phi_exact) : std::numeric_limits<double>::infinity();
  });

  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t i = 0; i < res.rows.size(); ++i) {
    ConvergenceRow& r = res.rows[i];
    r.rate = i == 0 ? nan : std::log(res.rows[i - 1].error / r.error) / std::log(res.rows[i - 1].dt / r.dt);
    if (i > 0 && !(r.error < res.rows[i - 1].error)) res.monotone = false;
  }
  res.fit_begin = res.rows.front().error > 1.0 ? 1 : 0;
  std::vector<double> xs, ys;
  for (std::size_t i = res.fit_begin; i < res.rows.size(); ++i) {
    xs.push_back(res.rows[i].dt);
    ys.push_back(res.rows[i].error);
  }
  res.fitted_rate = loglog_slope(xs, ys);
  return res;
}

std::vector<CompareEntry> adapt_compare(const AdaptCompareSetup& setup, const RealField& phi0,
                                        const RealField& psi0) {
  if (setup.controllers.empty()) throw ContractViolation("adapt_compare: no controllers given");
  std::vector<std::string> labels;
  for (ControllerKind c : setup.controllers) labels.emplace_back(to_string(c));
  if (setup.fixed_dt) labels.emplace_back("fixed");

  std::vector<std::optional<RunResult>> results(labels.size());
  parallel_for(labels.size(), setup.threads, [&](std::size_t i) {
    if (i < setup.controllers.size()) {
      AdaptiveRunOptions ao;
      ao.T = setup.T;
      ao.controller = setup.controllers[i];
      ao.record_every = setup.record_every;
      results[i].emplace(run_adaptive(setup.kind, phi0, psi0, setup.model, setup.scheme, setup.adaptive, ao));
    } else {
      SchemeParams sp = setup.scheme;
      sp.dt = *setup.fixed_dt;
      FixedRunOptions fo;
      fo.T = setup.T;
      fo.record_every = setup.record_every;
      results[i].emplace(run_fixed(setup.kind, phi0, psi0, setup.model, sp, fo));
    }
  });

  std::vector<CompareEntry> entries;
  for (std::size_t i = 0; i < labels.size(); ++i) entries.push_back({labels[i], std::move(*results[i])});
  return entries;
}

}  // namespace vmpfc
