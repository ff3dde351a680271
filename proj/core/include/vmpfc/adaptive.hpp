#pragma once

#include <cstddef>
#include <deque>
#include <string_view>
#include <vector>

#include "vmpfc/records.hpp"
#include "vmpfc/schemes.hpp"

namespace vmpfc {

struct AdaptiveParams {
  int w_size = 7;
  double ratio_max = 1.5;
  double dt_min = 1e-4;
  double dt_max = 2.0;
  double dt_cr = 0.014;  ///< stabilization switches on for dt > dt_cr
  double alpha1 = 1e4;
  double s_cr = 100.0;

  void validate() const;
};

/// Window of the last w_size energy variations |E_new - E_old|.
class EnergyHistory {
 public:
  explicit EnergyHistory(int w_size);

  void push(double e_new, double e_old);
  double mean() const;
  std::size_t size() const noexcept { return buffer_.size(); }
  bool empty() const noexcept { return buffer_.empty(); }
  const std::deque<double>& values() const noexcept { return buffer_; }

 private:
  std::size_t capacity_;
  std::deque<double> buffer_;
};

/// max(dt_min, dt_max / sqrt(1 + alpha1 * mean(history))). Throws on an empty history.
double evma_propose(const EnergyHistory& history, const AdaptiveParams& params);

/// Limits dt_proposed / dt_old to [1/ratio_max, ratio_max].
double ratio_clamp(double dt_proposed, double dt_old, const AdaptiveParams& params);

/// s_cr if dt > dt_cr, else 0.
double stabilization_select(double dt, const AdaptiveParams& params);

/// Energy-derivative rule with E' = (e_new - e_old) / dt_old, no clamp and no averaging.
double legacy_propose(double e_new, double e_old, double dt_old, const AdaptiveParams& params);

enum class ControllerKind { kEvma, kLegacy };

std::string_view to_string(ControllerKind kind) noexcept;
ControllerKind parse_controller_kind(std::string_view name);

struct AdaptiveRunOptions {
  double T = 1.0;
  ControllerKind controller = ControllerKind::kEvma;
  MonitoredEnergy monitored = MonitoredEnergy::kScheme;
  int record_every = 1;
  StepObserver observer;
};

/// Adaptive time stepping loop. The first step is the scheme's bootstrap at
/// dt_min with S = 0; every later step picks S from its own dt, takes a CN
/// step, pushes |dE| and proposes the next dt. The step that would reach
/// within dt_min of T is stretched or cut to land on T exactly.
RunResult run_adaptive(SchemeKind kind, const RealField& phi0, const RealField& psi0, const ModelParams& p,
                       const SchemeParams& sp, const AdaptiveParams& ap, const AdaptiveRunOptions& opts);

/// Indices i where dt[i]-dt[i-1] and dt[i+1]-dt[i] have opposite signs and
/// both change dt by at least min_rel_change of the earlier value.
std::vector<std::size_t> oscillation_events(const std::vector<double>& dts, double min_rel_change = 0.05);

/// Largest number of events falling in any window of `window` consecutive steps.
std::size_t max_events_in_window(const std::vector<std::size_t>& events, std::size_t window);

}  // namespace vmpfc
