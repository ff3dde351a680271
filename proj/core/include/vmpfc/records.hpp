#pragma once

#include <cstdint>
#include <exception>
#include <functional>
#include <string>
#include <utility>
#include <limits>
#include <vector>

#include "vmpfc/schemes.hpp"

namespace vmpfc {

/// One row of a time series. e_discrete is NaN for schemes without E_CN.
struct TimeSeriesRecord {
  double t = 0.0;
  double dt = 0.0;
  double mass = 0.0;  ///< mean(phi) * |Omega|
  double e_original = 0.0;
  double e_pseudo = 0.0;
  double e_modified = 0.0;
  double e_discrete = std::numeric_limits<double>::quiet_NaN();
  double aux = 0.0;
  double s_active = 0.0;
};

TimeSeriesRecord make_record(SchemeKind kind, const SchemeState& s, const ModelParams& p, const SchemeParams& sp,
                             double dt);

/// Outcome of a run loop. A failed run keeps everything recorded before the
/// failure; `failure` holds the exception and can be rethrown.
struct RunResult {
  explicit RunResult(SchemeState initial) : state(std::move(initial)) {}

  SchemeState state;
  std::vector<TimeSeriesRecord> records;
  std::int64_t steps = 0;
  double wall_seconds = 0.0;
  std::exception_ptr failure;

  bool ok() const noexcept { return !failure; }
  void rethrow_if_failed() const {
    if (failure) std::rethrow_exception(failure);
  }
};

/// Called after every accepted step with the state before it and the report.
using StepObserver = std::function<void(const SchemeState& before, const StepReport& step)>;

struct SeriesCheckOptions {
  double ratio_max = 0.0;        ///< 0 disables the step-ratio check
  double mass_tolerance = 1e-12;  ///< relative to max(1, |mass of the first row|)
  double energy_slack = 1e-9;     ///< relative increase allowed per row
  bool check_energy = true;       ///< monitors e_discrete when finite, else e_modified
};

struct SeriesCheck {
  bool ok = true;
  std::vector<std::string> problems;
};

/// Replays the run invariants over a recorded series: strictly increasing t,
/// constant mass, nonincreasing monitored energy, bounded step ratios (the
/// final row may be a truncated step and is exempt from the ratio check).
SeriesCheck verify_series(const std::vector<TimeSeriesRecord>& rows, const SeriesCheckOptions& opts);

}  // namespace vmpfc
