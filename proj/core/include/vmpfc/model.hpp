#pragma once

#include <string>
#include <vector>

#include "vmpfc/spectral.hpp"

namespace vmpfc {

/// Constants of the VMPFC equation
///   alpha phi_tt + beta phi_t = M Laplacian mu,
///   mu = (Laplacian + 1)^2 phi + f(phi) + f_vac(phi).
struct ModelParams {
  double alpha = 1.0;
  double beta = 1.0;
  double mobility = 1.0;
  double epsilon = 0.025;
  double h_vac = 0.0;

  /// Throws ContractViolation on an invariant violation. Returns non-fatal
  /// warnings (epsilon == 1 is admitted but reported).
  std::vector<std::string> validate() const;
};

/// Time-integrator constants. Defaults for the shifts follow the values used
/// throughout the convergence experiments.
struct SchemeParams {
  double stab_s = 0.0;   ///< stabilization S
  double sav_b = 1e4;    ///< SAV radicand shift b
  double gpav_c0 = 1e3;  ///< GPAV energy density shift c0
  double esav_c = 1e8;   ///< ESAV exponential damping C
  double dt = 0.01;

  void validate() const;
};

// Pointwise nonlinearities -------------------------------------------------

/// phi^3 - epsilon phi
RealField double_well_f(const RealField& phi, const ModelParams& p);
/// phi^4 / 4 - epsilon phi^2 / 2
RealField double_well_F(const RealField& phi, const ModelParams& p);
/// h_vac (|phi| - phi) phi; identically zero where phi >= 0
RealField vacancy_f(const RealField& phi, const ModelParams& p);
/// h_vac / 3 (|phi|^3 - phi^3); nonnegative
RealField vacancy_F(const RealField& phi, const ModelParams& p);

/// f(phi) + f_vac(phi)
RealField nonlinear_f(const RealField& phi, const ModelParams& p);
/// Integral of F(phi) + F_vac(phi) over the domain (cell-volume weighted sum).
double nonlinear_energy(const RealField& phi, const ModelParams& p);

// Energies -----------------------------------------------------------------

/// 1/2 ||(Laplacian + 1) phi||^2 evaluated spectrally.
double quadratic_energy(const RealField& phi);
/// Same quantity written as 1/2 ||Laplacian phi||^2 - ||grad phi||^2 + 1/2 ||phi||^2.
double quadratic_energy_expanded(const RealField& phi);

/// Free energy: quadratic part plus the integral of F + F_vac.
double original_energy(const RealField& phi, const ModelParams& p);
/// Original energy assembled from the expanded quadratic form.
double original_energy_expanded(const RealField& phi, const ModelParams& p);

/// original_energy(phi) + alpha / (2M) ||psi||_{-1}^2; psi must be mean-zero.
double pseudo_energy(const RealField& phi, const RealField& psi, const ModelParams& p);

/// E1 = pseudo energy + c0 |Omega|. Throws ShiftTooSmall if E1 <= 0.
double gpav_E1(const RealField& phi, const RealField& psi, const ModelParams& p, const SchemeParams& sp);

// Auxiliary variables ------------------------------------------------------

/// sqrt(int F + F_vac + b). Throws ShiftTooSmall on a nonpositive radicand.
double sav_u_init(const RealField& phi0, const ModelParams& p, const SchemeParams& sp);
/// (f + f_vac) / sqrt(int F + F_vac + b)
RealField sav_H(const RealField& phi, const ModelParams& p, const SchemeParams& sp);

/// sqrt(E1(phi0, psi0))
double gpav_R_init(const RealField& phi0, const RealField& psi0, const ModelParams& p, const SchemeParams& sp);
/// exp(pseudo_energy / C). Throws ScalingError when the exponent would overflow.
double esav_B_init(const RealField& phi0, const RealField& psi0, const ModelParams& p, const SchemeParams& sp);

/// exp(energy / C) with the overflow guard used by the ESAV scheme.
double esav_exp(double energy, double esav_c);

}  // namespace vmpfc
