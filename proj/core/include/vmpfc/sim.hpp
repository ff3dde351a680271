#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "vmpfc/adaptive.hpp"
#include "vmpfc/records.hpp"
#include "vmpfc/schemes.hpp"

namespace vmpfc {

/// splitmix64. Portable and fully specified, so a seed gives the same
/// sequence everywhere.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}
  std::uint64_t next() noexcept;
  /// Uniform in [-1, 1) from the top 53 bits.
  double uniform_pm1() noexcept;

 private:
  std::uint64_t state_;
};

struct RandomPerturbation {
  double mean = 0.06;
  double amplitude = 0.001;
  std::uint64_t seed = 1;
};

struct CrystalPatch {
  std::vector<double> center;
  double half_width = 0.0;
  double theta = 0.0;
};

struct Crystallites {
  double mean = 0.285;
  double amplitude = 0.446;
  double q = 0.66;
  std::vector<CrystalPatch> patches;
};

struct Manufactured {};

struct FromFile {
  std::string path;  ///< .f64 snapshot with its .json sidecar
};

using InitialCondition = std::variant<RandomPerturbation, Crystallites, Manufactured, FromFile>;

/// phi0 from the initial condition; psi0 is always zero.
std::pair<RealField, RealField> build_initial(const InitialCondition& ic, const GridPtr& grid);

/// Lattice value of one crystallite in local coordinates.
double crystal_lattice(double x_l, double y_l, double mean, double amplitude, double q);

struct FixedRunOptions {
  double T = 1.0;
  int record_every = 10;
  Forcing forcing;
  /// Repeat the first-order bootstrap step instead of switching to CN.
  bool first_order_only = false;
  StepObserver observer;
};

/// Bootstrap step, then CN steps of sp.dt until T; the last step is cut to
/// land on T. Records the initial state, every record_every-th step and the
/// final step.
RunResult run_fixed(SchemeKind kind, const RealField& phi0, const RealField& psi0, const ModelParams& p,
                    const SchemeParams& sp, const FixedRunOptions& opts);

struct ConvergenceRow {
  double dt = 0.0;
  double error = 0.0;
  double rate = 0.0;  ///< local rate against the previous row, NaN on the first
};

struct ConvergenceResult {
  std::vector<ConvergenceRow> rows;
  double fitted_rate = 0.0;
  std::size_t fit_begin = 0;  ///< first row used by the fit
  bool monotone = true;       ///< errors decrease with dt
};

struct ConvergenceOptions {
  double T = 1.0;
  bool first_order_only = false;
  int threads = 1;
};

/// Manufactured-solution study: L2 error of phi(T) for every dt in the
/// descending list and the least-squares slope of log error against log dt.
/// The largest dt is left out of the fit when its error exceeds 1.
ConvergenceResult convergence_study(SchemeKind kind, const GridPtr& grid, const ModelParams& p,
                                    const SchemeParams& sp_base, const std::vector<double>& dt_list,
                                    const ConvergenceOptions& opts);

/// Least-squares slope of log(y) against log(x).
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

struct CompareEntry {
  std::string label;  ///< "evma", "legacy" or "fixed"
  RunResult result;
};

struct AdaptCompareSetup {
  SchemeKind kind = SchemeKind::kSav;
  ModelParams model;
  SchemeParams scheme;
  AdaptiveParams adaptive;
  double T = 1.0;
  std::vector<ControllerKind> controllers;
  /// Fixed-step reference run; S is taken from scheme.stab_s. Skipped when empty.
  std::optional<double> fixed_dt;
  int record_every = 1;
  int threads = 1;
};

/// Runs the same initial state under each controller and the fixed reference.
std::vector<CompareEntry> adapt_compare(const AdaptCompareSetup& setup, const RealField& phi0, const RealField& psi0);

}  // namespace vmpfc
