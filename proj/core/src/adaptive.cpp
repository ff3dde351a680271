#include "vmpfc/adaptive.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <string>

#include "vmpfc/error.hpp"

namespace vmpfc {

void AdaptiveParams::validate() const {
  if (w_size < 1) throw ConfigError("adaptive.w_size", "must be >= 1");
  if (!(ratio_max > 1.0)) throw ConfigError("adaptive.ratio_max", "must be > 1");
  if (!(dt_min > 0.0)) throw ConfigError("adaptive.dt_min", "must be > 0");
  if (!(dt_max >= dt_min)) throw ConfigError("adaptive.dt_min/adaptive.dt_max", "dt_min must not exceed dt_max");
  if (!(dt_cr > 0.0)) throw ConfigError("adaptive.dt_cr", "must be > 0");
  if (!(alpha1 > 0.0)) throw ConfigError("adaptive.alpha1", "must be > 0");
  if (!(s_cr > 0.0)) throw ConfigError("adaptive.s_cr", "must be > 0");
}

EnergyHistory::EnergyHistory(int w_size) : capacity_(static_cast<std::size_t>(w_size)) {
  if (w_size < 1) throw ContractViolation("EnergyHistory: w_size must be >= 1");
}

void EnergyHistory::push(double e_new, double e_old) {
  buffer_.push_back(std::abs(e_new - e_old));
  while (buffer_.size() > capacity_) buffer_.pop_front();
}

double EnergyHistory::mean() const {
  if (buffer_.empty()) throw ContractViolation("EnergyHistory: mean of an empty history");
  return std::accumulate(buffer_.begin(), buffer_.end(), 0.0) / static_cast<double>(buffer_.size());
}

double evma_propose(const EnergyHistory& history, const AdaptiveParams& params) {
  if (history.empty()) throw ContractViolation("evma_propose: history is empty");
  return std::max(params.dt_min, params.dt_max / std::sqrt(1.0 + params.alpha1 * history.mean()));
}

double ratio_clamp(double dt_proposed, double dt_old, const AdaptiveParams& params) {
  if (!(dt_old > 0.0)) throw ContractViolation("ratio_clamp: dt_old must be > 0");
  const double rho = dt_proposed / dt_old;
  if (rho > params.ratio_max) return dt_old * params.ratio_max;
  if (rho < 1.0 / params.ratio_max) return dt_old / params.ratio_max;
  return dt_proposed;
}

double stabilization_select(double dt, const AdaptiveParams& params) { return dt > params.dt_cr ? params.s_cr : 0.0; }

double legacy_propose(double e_new, double e_old, double dt_old, const AdaptiveParams& params) {
  if (!(dt_old > 0.0)) throw ContractViolation("legacy_propose: dt_old must be > 0");
  const double de = (e_new - e_old) / dt_old;
  return std::max(params.dt_min, params.dt_max / std::sqrt(1.0 + params.alpha1 * de * de));
}

std::string_view to_string(ControllerKind kind) noexcept {
  return kind == ControllerKind::kEvma ? "evma" : "legacy";
}

ControllerKind parse_controller_kind(std::string_view name) {
  if (name == "evma") return ControllerKind::kEvma;
  if (name == "legacy") return ControllerKind::kLegacy;
  throw ContractViolation("unknown controller '" + std::string(name) + "' (expected evma or legacy)");
}

RunResult run_adaptive(SchemeKind kind, const RealField& phi0, const RealField& psi0, const ModelParams& p,
                       const SchemeParams& sp, const AdaptiveParams& ap, const AdaptiveRunOptions& opts) {
  ap.validate();
  if (!(opts.T > 0.0)) throw ContractViolation("run_adaptive: T must be > 0");
  if (opts.record_every < 1) throw ContractViolation("run_adaptive: record_every must be >= 1");

  SchemeParams sp_step = sp;
  sp_step.stab_s = 0.0;
  sp_step.dt = std::min(ap.dt_min, opts.T);

  RunResult out(initial_state(kind, phi0, psi0, p, sp_step));
  out.records.push_back(make_record(kind, out.state, p, sp_step, 0.0));
  const auto start = std::chrono::steady_clock::now();

  try {
    {
      StepReport rep = bootstrap_step(kind, out.state, p, sp_step);
      if (opts.observer) opts.observer(out.state, rep);
      out.state = std::move(rep.state);
      ++out.steps;
      out.records.push_back(make_record(kind, out.state, p, sp_step, sp_step.dt));
    }
    double e_old = monitored_energy(kind, out.state, p, sp_step, opts.monitored);
    double dt_new = ap.dt_min;
    EnergyHistory history(ap.w_size);

    while (out.state.t < opts.T) {
      // the step that would land within dt_min of T goes to T exactly
      double dt = dt_new;
      const bool last = out.state.t + dt >= opts.T - ap.dt_min;
      if (last) dt = opts.T - out.state.t;

      sp_step.stab_s = stabilization_select(dt, ap);
      StepReport rep = cn_step(kind, out.state, p, sp_step, dt);
      if (opts.observer) opts.observer(out.state, rep);
      out.state = std::move(rep.state);
      if (last) out.state.t = opts.T;
      ++out.steps;
      // Algorithm 1 sets dt_old to the step just taken before proposing
      const double dt_old = dt;

      const double e_new = monitored_energy(kind, out.state, p, sp_step, opts.monitored);
      double proposed = 0.0;
      if (opts.controller == ControllerKind::kEvma) {
        history.push(e_new, e_old);
        proposed = ratio_clamp(evma_propose(history, ap), dt_old, ap);
      } else {
        proposed = legacy_propose(e_new, e_old, dt_old, ap);
      }
      e_old = e_new;
      dt_new = proposed;

      if (last || out.steps % opts.record_every == 0) {
        out.records.push_back(make_record(kind, out.state, p, sp_step, dt));
      }
    }
  } catch (const Error&) {
    out.failure = std::current_exception();
  }
  out.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

std::vector<std::size_t> oscillation_events(const std::vector<double>& dts, double min_rel_change) {
  std::vector<std::size_t> events;
  auto sign = [&](std::size_t i) {
    const double d = dts[i + 1] - dts[i];
    if (std::abs(d) < min_rel_change * std::abs(dts[i])) return 0;
    return d > 0 ? 1 : -1;
  };
  for (std::size_t i = 1; i + 1 < dts.size(); ++i) {
    const int a = sign(i - 1);
    const int b = sign(i);
    if (a != 0 && b != 0 && a != b) events.push_back(i);
  }
  return events;
}

std::size_t max_events_in_window(const std::vector<std::size_t>& events, std::size_t window) {
  std::size_t best = 0;
  std::size_t lo = 0;
  for (std::size_t hi = 0; hi < events.size(); ++hi) {
    while (events[hi] - events[lo] >= window) ++lo;
    best = std::max(best, hi - lo + 1);
  }
  return best;
}

}  // namespace vmpfc
