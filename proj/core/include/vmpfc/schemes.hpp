#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <utility>

#include "vmpfc/model.hpp"
#include "vmpfc/spectral.hpp"

namespace vmpfc {

enum class SchemeKind { kSav, kGpav, kEsav };

/// "ssav", "sgpav" or "sesav".
std::string_view to_string(SchemeKind kind) noexcept;
SchemeKind parse_scheme_kind(std::string_view name);

/// Two time levels of phi and psi plus the scalar auxiliary variable.
///
/// `aux` holds u (SAV), R (GPAV) or B (ESAV); `aux_prev` is its previous
/// value, kept for the half-step extrapolation of R and B. Before the first
/// step phi_nm1 == phi_n, psi_nm1 == psi_n and dt_prev == 0.
struct SchemeState {
  RealField phi_n;
  RealField phi_nm1;
  RealField psi_n;
  RealField psi_nm1;
  double aux = 0.0;
  double aux_prev = 0.0;
  double t = 0.0;
  double dt_prev = 0.0;  ///< step size that took phi_nm1 to phi_n
  std::int64_t step_index = 0;
  double current_s = 0.0;  ///< stabilization used by the most recent step
};

/// Source term g(x, t) added to the right side of the momentum equation.
/// An empty function means no forcing.
using Forcing = std::function<RealField(const GridPtr&, double)>;

struct StepOptions {
  bool compute_energies = false;
  bool check_residual = false;
};

struct Energies {
  double original = 0.0;
  double pseudo = 0.0;
  double modified = 0.0;
  double discrete = 0.0;  ///< E_CN for SAV states, NaN otherwise
};

struct StepReport {
  SchemeState state;
  std::optional<Energies> energies;
  double xi = 1.0;  ///< GPAV xi_1^{n+1/2}, ESAV xi^{n+1}; 1 for SAV
  std::optional<double> residual;
  double dt_used = 0.0;
};

/// Builds the step-0 state: psi0 must be mean-zero; aux = u0, R0 or B0.
SchemeState initial_state(SchemeKind kind, const RealField& phi0, const RealField& psi0, const ModelParams& p,
                          const SchemeParams& sp);

// Extrapolation --------------------------------------------------------------
//
// Second-order explicit predictions from levels n and n-1 for variable steps,
// r = dt_n / dt_nm1. With r == 1 these are 3/2 f^n - 1/2 f^{n-1} and
// 2 f^n - f^{n-1}.

inline double extrap_half(double f_n, double f_nm1, double dt_n, double dt_nm1) {
  const double r = dt_n / dt_nm1;
  return (1.0 + 0.5 * r) * f_n - 0.5 * r * f_nm1;
}

inline double extrap_full(double f_n, double f_nm1, double dt_n, double dt_nm1) {
  const double r = dt_n / dt_nm1;
  return (1.0 + r) * f_n - r * f_nm1;
}

RealField extrap_half(const RealField& f_n, const RealField& f_nm1, double dt_n, double dt_nm1);
RealField extrap_full(const RealField& f_n, const RealField& f_nm1, double dt_n, double dt_nm1);

// Steps ------------------------------------------------------------------------
//
// Bootstrap steps advance by sp.dt with the first-order (backward Euler) form
// of each scheme; CN steps take an explicit dt and need step_index >= 1.
// Stabilization is sp.stab_s in both cases.

StepReport ssav_bootstrap(const SchemeState& s, const ModelParams& p, const SchemeParams& sp,
                          const Forcing& forcing = {}, StepOptions opts = {});
StepReport ssav_cn_step(const SchemeState& s, const ModelParams& p, const SchemeParams& sp, double dt,
                        const Forcing& forcing = {}, StepOptions opts = {});

StepReport sgpav_bootstrap(const SchemeState& s, const ModelParams& p, const SchemeParams& sp,
                           const Forcing& forcing = {}, StepOptions opts = {});
StepReport sgpav_cn_step(const SchemeState& s, const ModelParams& p, const SchemeParams& sp, double dt,
                         const Forcing& forcing = {}, StepOptions opts = {});

StepReport sesav_bootstrap(const SchemeState& s, const ModelParams& p, const SchemeParams& sp,
                           const Forcing& forcing = {}, StepOptions opts = {});
StepReport sesav_cn_step(const SchemeState& s, const ModelParams& p, const SchemeParams& sp, double dt,
                         const Forcing& forcing = {}, StepOptions opts = {});

StepReport bootstrap_step(SchemeKind kind, const SchemeState& s, const ModelParams& p, const SchemeParams& sp,
                          const Forcing& forcing = {}, StepOptions opts = {});
StepReport cn_step(SchemeKind kind, const SchemeState& s, const ModelParams& p, const SchemeParams& sp, double dt,
                   const Forcing& forcing = {}, StepOptions opts = {});

/// Substitutes the computed level n+1 back into the defining equations of
/// the step (momentum, psi recovery, auxiliary update) and returns the
/// largest residual, each relative to the magnitude of the terms of its own
/// equation. Evaluated directly from the equations, independently of the
/// solve path.
double scheme_residual(SchemeKind kind, bool bootstrap, const SchemeState& before, const SchemeState& after,
                       const ModelParams& p, const SchemeParams& sp, double dt, const Forcing& forcing = {});

// Energies -------------------------------------------------------------------

/// E_CN = 1/2 ||(Lap+1) phi^n||^2 + S/2 ||phi^n - phi^{n-1}||^2 + (u^n)^2 + alpha/(2M) ||psi^n||_{-1}^2
/// with S = s.current_s.
double discrete_energy_cn(const SchemeState& s, const ModelParams& p);
/// Same with an explicit S (used to compare consecutive levels under one S).
double discrete_energy_cn(const SchemeState& s, const ModelParams& p, double stab_s);

/// SAV: 1/2 ||(Lap+1) phi||^2 + alpha/(2M) ||psi||_{-1}^2 + u^2 - b;
/// GPAV: R^2 - c0 |Omega|; ESAV: C ln B.
double modified_energy(SchemeKind kind, const SchemeState& s, const ModelParams& p, const SchemeParams& sp);

Energies evaluate_energies(SchemeKind kind, const SchemeState& s, const ModelParams& p, const SchemeParams& sp);

/// Which functional a driver or controller watches.
enum class MonitoredEnergy {
  kScheme,  ///< E_CN for SAV, R^2 - c0|Omega| for GPAV, C ln B for ESAV
  kPseudo,
};

double monitored_energy(SchemeKind kind, const SchemeState& s, const ModelParams& p, const SchemeParams& sp,
                        MonitoredEnergy which = MonitoredEnergy::kScheme);

/// beta/M dt ||(psi^{n+1} + psi^n)/2||_{-1}^2, the dissipation bound of one SAV CN step.
double sav_cn_dissipation(const SchemeState& before, const SchemeState& after, const ModelParams& p, double dt);

// Manufactured solution --------------------------------------------------------

/// phi_e = sin(8 pi x / L_x) prod_{j>0} cos(8 pi x_j / L_j) cos(t) and psi_e = d phi_e / dt.
/// On [0,128]^2 this is sin(pi x / 16) cos(pi y / 16) cos(t).
std::pair<RealField, RealField> manufactured_exact(const GridPtr& grid, double t);

/// g = alpha d_t psi_e + beta psi_e - M Lap[(Lap+1)^2 phi_e + f(phi_e) + f_vac(phi_e)],
/// evaluated with the discrete spectral operators.
Forcing manufactured_forcing(const ModelParams& p);

}  // namespace vmpfc
