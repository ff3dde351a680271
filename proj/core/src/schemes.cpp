#include "vmpfc/schemes.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "vmpfc/error.hpp"

namespace vmpfc {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double sh_symbol(double k2) { return (1.0 - k2) * (1.0 - k2); }

void require_history(const SchemeState& s, const char* who) {
  if (s.step_index < 1 || !(s.dt_prev > 0.0)) {
    throw ContractViolation(std::string(who) + ": a CN step needs two time levels (run the bootstrap step first)");
  }
}

void require_dt(double dt, const char* who) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ContractViolation(std::string(who) + ": dt must be positive");
}

void require_finite(const RealField& f, const char* who) {
  if (!f.all_finite()) throw NumericalFailure(std::string(who) + ": step produced non-finite values");
}

std::optional<SpectralField> forcing_hat(const Forcing& forcing, const GridPtr& grid, double t) {
  if (!forcing) return std::nullopt;
  return to_spectral(forcing(grid, t));
}

// Fills in everything of a StepReport that does not depend on the scheme.
StepReport finish(SchemeKind kind, const SchemeState& before, SchemeState after, double dt, double xi,
                  const ModelParams& p, const SchemeParams& sp, const Forcing& forcing, StepOptions opts,
                  bool bootstrap) {
  StepReport rep{std::move(after), std::nullopt, xi, std::nullopt, dt};
  if (opts.compute_energies) rep.energies = evaluate_energies(kind, rep.state, p, sp);
  if (opts.check_residual) {
    rep.residual = scheme_residual(kind, bootstrap, before, rep.state, p, sp, dt, forcing);
  }
  return rep;
}

// The zero mode of every step is decoupled: mean(psi) stays 0 and mean(phi)
// stays put. Solves reproduce that only to round-off, which accumulates over
// long runs, so the identity is re-imposed here. A discrepancy above the
// mean tolerance is a real defect and is reported instead.
void pin_zero_mode(RealField& f, double target) {
  const double drift = mean(f) - target;
  const double tol = mean_tolerance(f);
  if (std::abs(drift) > tol) throw MeanViolation(drift, tol);
  for (double& v : f.values()) v -= drift;
}

SchemeState advance(const SchemeState& s, RealField phi_new, RealField psi_new, double aux_new, double dt,
                    double stab_s) {
  pin_zero_mode(phi_new, mean(s.phi_n));
  pin_zero_mode(psi_new, 0.0);
  SchemeState out{std::move(phi_new), s.phi_n, std::move(psi_new), s.psi_n, aux_new, s.aux,
                  s.t + dt,           dt,      s.step_index + 1,   stab_s};
  return out;
}

}  // namespace

std::string_view to_string(SchemeKind kind) noexcept {
  switch (kind) {
    case SchemeKind::kSav:
      return "ssav";
    case SchemeKind::kGpav:
      return "sgpav";
    case SchemeKind::kEsav:
      return "sesav";
  }
  return "?";
}

SchemeKind parse_scheme_kind(std::string_view name) {
  if (name == "ssav" || name == "sav") return SchemeKind::kSav;
  if (name == "sgpav" || name == "gpav") return SchemeKind::kGpav;
  if (name == "sesav" || name == "esav") return SchemeKind::kEsav;
  throw ContractViolation("unknown scheme '" + std::string(name) + "' (expected ssav, sgpav or sesav)");
}

SchemeState initial_state(SchemeKind kind, const RealField& phi0, const RealField& psi0, const ModelParams& p,
                          const SchemeParams& sp) {
  if (std::abs(mean(psi0)) > mean_tolerance(psi0)) throw MeanViolation(mean(psi0), mean_tolerance(psi0));
  double aux = 0.0;
  switch (kind) {
    case SchemeKind::kSav:
      aux = sav_u_init(phi0, p, sp);
      break;
    case SchemeKind::kGpav:
      aux = gpav_R_init(phi0, psi0, p, sp);
      break;
    case SchemeKind::kEsav:
      aux = esav_B_init(phi0, psi0, p, sp);
      break;
  }
  return SchemeState{phi0, phi0, psi0, psi0, aux, aux, 0.0, 0.0, 0, sp.stab_s};
}

RealField extrap_half(const RealField& f_n, const RealField& f_nm1, double dt_n, double dt_nm1) {
  const double r = dt_n / dt_nm1;
  RealField out = f_n * (1.0 + 0.5 * r);
  out.axpy(-0.5 * r, f_nm1);
  return out;
}

RealField extrap_full(const RealField& f_n, const RealField& f_nm1, double dt_n, double dt_nm1) {
  const double r = dt_n / dt_nm1;
  RealField out = f_n * (1.0 + r);
  out.axpy(-r, f_nm1);
  return out;
}

// ---------------------------------------------------------------------------
// S-SAV

StepReport ssav_bootstrap(const SchemeState& s, const ModelParams& p, const SchemeParams& sp,
                          const Forcing& forcing, StepOptions opts) {
  const double dt = sp.dt;
  require_dt(dt, "ssav_bootstrap");
  const GridPtr& grid = s.phi_n.grid();
  const double M = p.mobility;
  const double S = sp.stab_s;
  const auto kappa = grid->wavenumber_sq();

  const RealField H = sav_H(s.phi_n, p, sp);
  const SpectralField H_hat = to_spectral(H);
  const SpectralField phi_hat = to_spectral(s.phi_n);
  const SpectralField psi_hat = to_spectral(s.psi_n);
  const auto g_hat = forcing_hat(forcing, grid, s.t + dt);

  // P1 = alpha/(M dt^2) + beta/(M dt) - Lap (Lap+1)^2 - S Lap
  const double c1 = p.alpha / (M * dt * dt) + p.beta / (M * dt);
  const FourierSymbol P1{"bootstrap P", [=](double k2) { return c1 + k2 * sh_symbol(k2) + S * k2; }};

  // P1 phi^1 - 1/2 Lap H^0 (H^0, phi^1) = g
  const double h_phi0 = l2_inner(H, s.phi_n);
  const double coupling = s.aux - 0.5 * h_phi0;
  SpectralField rhs(grid);
  SpectralField lap_H(grid);
  for (std::size_t i = 0; i < rhs.size(); ++i) {
    lap_H[i] = -kappa[i] * H_hat[i];
    rhs[i] = (c1 + S * kappa[i]) * phi_hat[i] + p.alpha / (M * dt) * psi_hat[i] + coupling * lap_H[i];
    if (g_hat) rhs[i] += (*g_hat)[i] / M;
  }
  const SpectralField psi1 = solve_symbol(rhs, P1);
  const SpectralField psi2 = solve_symbol(lap_H, P1);

  const double denom = 1.0 - 0.5 * l2_inner(psi2, H_hat);
  if (!(denom > 0.0)) throw SolvabilityError("ssav_bootstrap: rank-one denominator is not positive");
  const double h_phi1 = l2_inner(psi1, H_hat) / denom;

  SpectralField phi1_hat = psi1;
  phi1_hat.axpy(0.5 * h_phi1, psi2);
  RealField phi1 = to_physical(phi1_hat);
  require_finite(phi1, "ssav_bootstrap");

  RealField psi1_new = (phi1 - s.phi_n) * (1.0 / dt);
  const double u1 = s.aux + 0.5 * (h_phi1 - h_phi0);

  SchemeState next = advance(s, std::move(phi1), std::move(psi1_new), u1, dt, S);
  return finish(SchemeKind::kSav, s, std::move(next), dt, 1.0, p, sp, forcing, opts, true);
}

StepReport ssav_cn_step(const SchemeState& s, const ModelParams& p, const SchemeParams& sp, double dt,
                        const Forcing& forcing, StepOptions opts) {
  require_dt(dt, "ssav_cn_step");
  require_history(s, "ssav_cn_step");
  const GridPtr& grid = s.phi_n.grid();
  const double M = p.mobility;
  const double S = sp.stab_s;
  const auto kappa = grid->wavenumber_sq();

  const RealField phi_dagger = extrap_half(s.phi_n, s.phi_nm1, dt, s.dt_prev);
  const RealField phi_star = extrap_full(s.phi_n, s.phi_nm1, dt, s.dt_prev);
  const RealField H = sav_H(phi_dagger, p, sp);
  const SpectralField H_hat = to_spectral(H);
  const SpectralField phi_hat = to_spectral(s.phi_n);
  const SpectralField psi_hat = to_spectral(s.psi_n);
  const SpectralField star_hat = to_spectral(phi_star);
  const auto g_hat = forcing_hat(forcing, grid, s.t + 0.5 * dt);

  // P = 2/(M dt) (alpha/dt + beta/2) - 1/2 Lap (Lap+1)^2 - S Lap
  const double c0 = 2.0 / (M * dt) * (p.alpha / dt + 0.5 * p.beta);
  const FourierSymbol P{"P", [=](double k2) { return c0 + 0.5 * k2 * sh_symbol(k2) + S * k2; }};

  // psi^{n+1} = 2/dt phi^{n+1} + g1,  u^{n+1} = 1/2 (H, phi^{n+1}) + g2
  // and u^{n+1/2} = 1/4 (H, phi^{n+1}) + (g2 + u^n) / 2, giving
  // P phi^{n+1} - 1/4 Lap H (H, phi^{n+1}) = g~.
  const double h_phin = l2_inner(H, s.phi_n);
  const double g2 = -0.5 * h_phin + s.aux;
  const double a_m = p.alpha / (M * dt);
  const double b_m = 0.5 * p.beta / M;
  SpectralField rhs(grid);
  SpectralField lap_H(grid);
  for (std::size_t i = 0; i < rhs.size(); ++i) {
    const std::complex<double> g1 = -2.0 / dt * phi_hat[i] - psi_hat[i];
    lap_H[i] = -kappa[i] * H_hat[i];
    rhs[i] = (a_m - b_m) * psi_hat[i] - 0.5 * kappa[i] * sh_symbol(kappa[i]) * phi_hat[i] - (a_m + b_m) * g1 +
             0.5 * (g2 + s.aux) * lap_H[i] + S * kappa[i] * star_hat[i];
    if (g_hat) rhs[i] += (*g_hat)[i] / M;
  }

  // (i) psi_1 = P^{-1} g~, (ii) psi_2 = P^{-1} Lap H, (iii) rank-one correction
  const SpectralField psi1 = solve_symbol(rhs, P);
  const SpectralField psi2 = solve_symbol(lap_H, P);
  const double denom = 1.0 - 0.25 * l2_inner(psi2, H_hat);
  if (!(denom > 0.0)) throw SolvabilityError("ssav_cn_step: rank-one denominator is not positive");
  const double h_phi = l2_inner(psi1, H_hat) / denom;

  SpectralField phi_new_hat = psi1;
  phi_new_hat.axpy(0.25 * h_phi, psi2);
  RealField phi_new = to_physical(phi_new_hat);
  require_finite(phi_new, "ssav_cn_step");

  RealField psi_new = (phi_new - s.phi_n) * (2.0 / dt);
  psi_new -= s.psi_n;
  const double u_new = 0.5 * h_phi + g2;

  SchemeState next = advance(s, std::move(phi_new), std::move(psi_new), u_new, dt, S);
  return finish(SchemeKind::kSav, s, std::move(next), dt, 1.0, p, sp, forcing, opts, false);
}

// ---------------------------------------------------------------------------
// S-GPAV and S-ESAV share the linear solve: both freeze xi (f + f_vac) at an
// explicit state and differ only in how xi and the auxiliary variable evolve.

namespace {

// (alpha/dt + beta) phi^1 - dt M Lap[(Lap+1)^2 phi^1 + S phi^1] = rhs
RealField ratio_bootstrap_solve(const SchemeState& s, const ModelParams& p, double S, double dt, double xi,
                                const std::optional<RealField>& g) {
  const GridPtr& grid = s.phi_n.grid();
  const double M = p.mobility;
  const auto kappa = grid->wavenumber_sq();
  const double a0 = p.alpha / dt + p.beta;
  const FourierSymbol sym{"bootstrap M", [=](double k2) { return a0 + dt * M * (k2 * sh_symbol(k2) + S * k2); }};

  const SpectralField phi_hat = to_spectral(s.phi_n);
  const SpectralField psi_hat = to_spectral(s.psi_n);
  const SpectralField N_hat = to_spectral(nonlinear_f(s.phi_n, p));
  const auto g_hat = g ? std::optional<SpectralField>(to_spectral(*g)) : std::nullopt;

  SpectralField rhs(grid);
  for (std::size_t i = 0; i < rhs.size(); ++i) {
    rhs[i] = (a0 + dt * M * S * kappa[i]) * phi_hat[i] + p.alpha * psi_hat[i] - dt * M * xi * kappa[i] * N_hat[i];
    if (g_hat) rhs[i] += dt * (*g_hat)[i];
  }
  RealField phi1 = to_physical(solve_symbol(rhs, sym));
  require_finite(phi1, "bootstrap");
  return phi1;
}

// M(phi^{n+1}) = g^n with
// M = (alpha + dt beta/2) 2/dt - dt M/2 Lap (Lap+1)^2 - dt M S Lap.
RealField ratio_cn_solve(const SchemeState& s, const ModelParams& p, double S, double dt, double xi,
                         const RealField& phi_dagger, const RealField& phi_star, const std::optional<RealField>& g) {
  const GridPtr& grid = s.phi_n.grid();
  const double M = p.mobility;
  const auto kappa = grid->wavenumber_sq();
  const double a0 = (p.alpha + 0.5 * dt * p.beta) * 2.0 / dt;
  const FourierSymbol sym{"M", [=](double k2) { return a0 + 0.5 * dt * M * k2 * sh_symbol(k2) + dt * M * S * k2; }};

  const SpectralField phi_hat = to_spectral(s.phi_n);
  const SpectralField psi_hat = to_spectral(s.psi_n);
  const SpectralField star_hat = to_spectral(phi_star);
  const SpectralField N_hat = to_spectral(nonlinear_f(phi_dagger, p));
  const auto g_hat = g ? std::optional<SpectralField>(to_spectral(*g)) : std::nullopt;

  const double ghat_phi = 2.0 * p.alpha / dt + p.beta;
  SpectralField rhs(grid);
  for (std::size_t i = 0; i < rhs.size(); ++i) {
    const double k2 = kappa[i];
    rhs[i] = 2.0 * p.alpha * psi_hat[i] + ghat_phi * phi_hat[i] - 0.5 * dt * M * k2 * sh_symbol(k2) * phi_hat[i] -
             dt * M * xi * k2 * N_hat[i] + dt * M * S * k2 * star_hat[i];
    if (g_hat) rhs[i] += dt * (*g_hat)[i];
  }
  RealField phi_new = to_physical(solve_symbol(rhs, sym));
  require_finite(phi_new, "cn step");
  return phi_new;
}

std::optional<RealField> sample_forcing(const Forcing& forcing, const GridPtr& grid, double t) {
  if (!forcing) return std::nullopt;
  return forcing(grid, t);
}

// (g, psi)_{-1}: the power of the forcing, which enters the energy law of the
// continuous problem as d/dt E~ = (-beta ||psi||_{-1}^2 + (g, psi)_{-1}) / M.
double forcing_work(const std::optional<RealField>& g, const RealField& psi) {
  return g ? hm1_inner(*g, psi) : 0.0;
}

// R or B divided by 1 + factor * (beta ||psi||^2 - (g, psi)_{-1}).
double aux_update(double aux, double factor, double beta, double psi_norm, double work, const char* who) {
  const double denom = 1.0 + factor * (beta * psi_norm * psi_norm - work);
  if (!(denom > 0.0)) throw NumericalFailure(std::string(who) + ": forcing drives the auxiliary variable negative");
  return aux / denom;
}

}  // namespace

StepReport sgpav_bootstrap(const SchemeState& s, const ModelParams& p, const SchemeParams& sp,
                           const Forcing& forcing, StepOptions opts) {
  const double dt = sp.dt;
  require_dt(dt, "sgpav_bootstrap");
  const double xi = s.aux / std::sqrt(gpav_E1(s.phi_n, s.psi_n, p, sp));
  const auto g = sample_forcing(forcing, s.phi_n.grid(), s.t + dt);
  RealField phi1 = ratio_bootstrap_solve(s, p, sp.stab_s, dt, xi, g);
  RealField psi1 = (phi1 - s.phi_n) * (1.0 / dt);

  const double e1 = gpav_E1(phi1, psi1, p, sp);
  const double r1 = aux_update(s.aux, dt / (2.0 * p.mobility * e1), p.beta, hm1_norm(psi1), forcing_work(g, psi1),
                               "sgpav_bootstrap");

  SchemeState next = advance(s, std::move(phi1), std::move(psi1), r1, dt, sp.stab_s);
  return finish(SchemeKind::kGpav, s, std::move(next), dt, xi, p, sp, forcing, opts, true);
}

StepReport sgpav_cn_step(const SchemeState& s, const ModelParams& p, const SchemeParams& sp, double dt,
                         const Forcing& forcing, StepOptions opts) {
  require_dt(dt, "sgpav_cn_step");
  require_history(s, "sgpav_cn_step");
  const RealField phi_dagger = extrap_half(s.phi_n, s.phi_nm1, dt, s.dt_prev);
  const RealField psi_dagger = extrap_half(s.psi_n, s.psi_nm1, dt, s.dt_prev);
  const RealField phi_star = extrap_full(s.phi_n, s.phi_nm1, dt, s.dt_prev);
  const double r_dagger = extrap_half(s.aux, s.aux_prev, dt, s.dt_prev);
  const double xi1 = r_dagger / std::sqrt(gpav_E1(phi_dagger, psi_dagger, p, sp));

  const auto g = sample_forcing(forcing, s.phi_n.grid(), s.t + 0.5 * dt);
  RealField phi_new = ratio_cn_solve(s, p, sp.stab_s, dt, xi1, phi_dagger, phi_star, g);
  RealField psi_half = (phi_new - s.phi_n) * (1.0 / dt);
  RealField phi_half = (phi_new + s.phi_n) * 0.5;
  RealField psi_new = psi_half * 2.0 - s.psi_n;

  const double e1_half = gpav_E1(phi_half, psi_half, p, sp);
  const double e1_new = gpav_E1(phi_new, psi_new, p, sp);
  const double r_new = aux_update(s.aux, dt / (2.0 * p.mobility * std::sqrt(e1_half) * std::sqrt(e1_new)), p.beta,
                                  hm1_norm(psi_half), forcing_work(g, psi_half), "sgpav_cn_step");

  SchemeState next = advance(s, std::move(phi_new), std::move(psi_new), r_new, dt, sp.stab_s);
  return finish(SchemeKind::kGpav, s, std::move(next), dt, xi1, p, sp, forcing, opts, false);
}

StepReport sesav_bootstrap(const SchemeState& s, const ModelParams& p, const SchemeParams& sp,
                           const Forcing& forcing, StepOptions opts) {
  const double dt = sp.dt;
  require_dt(dt, "sesav_bootstrap");
  const double xi = s.aux / esav_exp(pseudo_energy(s.phi_n, s.psi_n, p), sp.esav_c);
  const auto g = sample_forcing(forcing, s.phi_n.grid(), s.t + dt);
  RealField phi1 = ratio_bootstrap_solve(s, p, sp.stab_s, dt, xi, g);
  RealField psi1 = (phi1 - s.phi_n) * (1.0 / dt);

  const double b1 = aux_update(s.aux, dt / (sp.esav_c * p.mobility), p.beta, hm1_norm(psi1), forcing_work(g, psi1),
                               "sesav_bootstrap");

  SchemeState next = advance(s, std::move(phi1), std::move(psi1), b1, dt, sp.stab_s);
  return finish(SchemeKind::kEsav, s, std::move(next), dt, xi, p, sp, forcing, opts, true);
}

StepReport sesav_cn_step(const SchemeState& s, const ModelParams& p, const SchemeParams& sp, double dt,
                         const Forcing& forcing, StepOptions opts) {
  require_dt(dt, "sesav_cn_step");
  require_history(s, "sesav_cn_step");
  const RealField phi_dagger = extrap_half(s.phi_n, s.phi_nm1, dt, s.dt_prev);
  const RealField psi_dagger = extrap_half(s.psi_n, s.psi_nm1, dt, s.dt_prev);
  const RealField phi_star = extrap_full(s.phi_n, s.phi_nm1, dt, s.dt_prev);
  const double b_dagger = extrap_half(s.aux, s.aux_prev, dt, s.dt_prev);
  const double xi = b_dagger / esav_exp(pseudo_energy(phi_dagger, psi_dagger, p), sp.esav_c);

  const auto g = sample_forcing(forcing, s.phi_n.grid(), s.t + 0.5 * dt);
  RealField phi_new = ratio_cn_solve(s, p, sp.stab_s, dt, xi, phi_dagger, phi_star, g);
  RealField psi_half = (phi_new - s.phi_n) * (1.0 / dt);
  RealField psi_new = psi_half * 2.0 - s.psi_n;

  const double b_new = aux_update(s.aux, dt / (sp.esav_c * p.mobility), p.beta, hm1_norm(psi_half),
                                  forcing_work(g, psi_half), "sesav_cn_step");

  SchemeState next = advance(s, std::move(phi_new), std::move(psi_new), b_new, dt, sp.stab_s);
  return finish(SchemeKind::kEsav, s, std::move(next), dt, xi, p, sp, forcing, opts, false);
}

StepReport bootstrap_step(SchemeKind kind, const SchemeState& s, const ModelParams& p, const SchemeParams& sp,
                          const Forcing& forcing, StepOptions opts) {
  switch (kind) {
    case SchemeKind::kSav:
      return ssav_bootstrap(s, p, sp, forcing, opts);
    case SchemeKind::kGpav:
      return sgpav_bootstrap(s, p, sp, forcing, opts);
    case SchemeKind::kEsav:
      return sesav_bootstrap(s, p, sp, forcing, opts);
  }
  throw ContractViolation("bootstrap_step: unknown scheme");
}

StepReport cn_step(SchemeKind kind, const SchemeState& s, const ModelParams& p, const SchemeParams& sp, double dt,
                   const Forcing& forcing, StepOptions opts) {
  switch (kind) {
    case SchemeKind::kSav:
      return ssav_cn_step(s, p, sp, dt, forcing, opts);
    case SchemeKind::kGpav:
      return sgpav_cn_step(s, p, sp, dt, forcing, opts);
    case SchemeKind::kEsav:
      return sesav_cn_step(s, p, sp, dt, forcing, opts);
  }
  throw ContractViolation("cn_step: unknown scheme");
}

// ---------------------------------------------------------------------------
// Residual oracle

namespace {

// |lhs - rhs| relative to the largest term, for a scalar equation written as
// a sum of terms that should vanish. `floor` is the size at which round-off in
// the state itself shows up, so a state at rest does not read as 0/0.
double scalar_residual(std::initializer_list<double> terms, double floor) {
  double sum = 0.0;
  double scale = std::abs(floor);
  for (double t : terms) {
    sum += t;
    scale = std::max(scale, std::abs(t));
  }
  return scale > 0.0 ? std::abs(sum) / scale : 0.0;
}

double field_residual(std::initializer_list<const RealField*> terms, double floor) {
  const RealField& first = **terms.begin();
  RealField sum(first.grid());
  double scale = floor;
  for (const RealField* t : terms) {
    sum += *t;
    scale = std::max(scale, l2_norm(*t));
  }
  return scale > 0.0 ? l2_norm(sum) / scale : 0.0;
}

}  // namespace

double scheme_residual(SchemeKind kind, bool bootstrap, const SchemeState& before, const SchemeState& after,
                       const ModelParams& p, const SchemeParams& sp, double dt, const Forcing& forcing) {
  const GridPtr& grid = before.phi_n.grid();
  const double M = p.mobility;
  const double S = sp.stab_s;
  const RealField& phi0 = before.phi_n;
  const RealField& phi1 = after.phi_n;
  const RealField& psi0 = before.psi_n;
  const RealField& psi1 = after.psi_n;

  // Chemical potential and the matching psi average / midpoint relation.
  RealField mu(grid);
  RealField psi_avg(grid);
  RealField midpoint_res(grid);
  RealField nonlinear_term(grid);
  double aux_res = 0.0;

  const RealField increment = phi1 - phi0;
  if (bootstrap) {
    mu = apply_symbol(phi1, FourierSymbol::swift_hohenberg());
    psi_avg = psi1;
    // psi^1 = (phi^1 - phi^0)/dt
    midpoint_res = psi1 - increment * (1.0 / dt);
  } else {
    mu = apply_symbol((phi1 + phi0) * 0.5, FourierSymbol::swift_hohenberg());
    psi_avg = (psi1 + psi0) * 0.5;
    midpoint_res = psi_avg - increment * (1.0 / dt);
  }
  const double midpoint_scale = std::max({l2_norm(psi_avg), l2_norm(increment) / dt, l2_norm(phi1) / dt});
  const double midpoint = midpoint_scale > 0.0 ? l2_norm(midpoint_res) / midpoint_scale : 0.0;

  RealField stab = phi1;
  if (bootstrap) {
    stab -= phi0;
  } else {
    stab -= extrap_full(phi0, before.phi_nm1, dt, before.dt_prev);
  }
  mu.axpy(S, stab);

  const RealField phi_explicit = bootstrap ? phi0 : extrap_half(phi0, before.phi_nm1, dt, before.dt_prev);
  const double t_force = bootstrap ? before.t + dt : before.t + 0.5 * dt;
  const std::optional<RealField> g = forcing ? std::optional<RealField>(forcing(grid, t_force)) : std::nullopt;
  const RealField& psi_mid = bootstrap ? psi1 : psi_avg;
  const double work = g ? hm1_inner(*g, psi_mid) : 0.0;
  switch (kind) {
    case SchemeKind::kSav: {
      const RealField H = sav_H(phi_explicit, p, sp);
      const double u_mid = bootstrap ? after.aux : 0.5 * (after.aux + before.aux);
      nonlinear_term = H * u_mid;
      const double coupling = 0.5 * l2_inner(H, increment);
      aux_res = scalar_residual({after.aux, -before.aux, -coupling}, 0.0);
      break;
    }
    case SchemeKind::kGpav: {
      double xi = 0.0;
      if (bootstrap) {
        xi = before.aux / std::sqrt(gpav_E1(phi0, psi0, p, sp));
        const double e1 = gpav_E1(phi1, psi1, p, sp);
        const double h = hm1_norm(psi1);
        const double k = after.aux / (2.0 * M * e1);
        aux_res = scalar_residual({(after.aux - before.aux) / dt, k * p.beta * h * h, -k * work}, after.aux / dt);
      } else {
        const RealField psi_dagger = extrap_half(psi0, before.psi_nm1, dt, before.dt_prev);
        const double r_dagger = extrap_half(before.aux, before.aux_prev, dt, before.dt_prev);
        xi = r_dagger / std::sqrt(gpav_E1(phi_explicit, psi_dagger, p, sp));
        const RealField psi_half = increment * (1.0 / dt);
        const RealField phi_half = (phi1 + phi0) * 0.5;
        const double xi2 = after.aux / std::sqrt(gpav_E1(phi1, psi1, p, sp));
        const double h = hm1_norm(psi_half);
        const double k = xi2 / (2.0 * M * std::sqrt(gpav_E1(phi_half, psi_half, p, sp)));
        aux_res = scalar_residual({(after.aux - before.aux) / dt, k * p.beta * h * h, -k * work}, after.aux / dt);
      }
      nonlinear_term = nonlinear_f(phi_explicit, p) * xi;
      break;
    }
    case SchemeKind::kEsav: {
      double xi = 0.0;
      const RealField psi_half = bootstrap ? psi1 : increment * (1.0 / dt);
      if (bootstrap) {
        xi = before.aux / esav_exp(pseudo_energy(phi0, psi0, p), sp.esav_c);
      } else {
        const RealField psi_dagger = extrap_half(psi0, before.psi_nm1, dt, before.dt_prev);
        const double b_dagger = extrap_half(before.aux, before.aux_prev, dt, before.dt_prev);
        xi = b_dagger / esav_exp(pseudo_energy(phi_explicit, psi_dagger, p), sp.esav_c);
      }
      const double h = hm1_norm(psi_half);
      const double k = after.aux / (sp.esav_c * M);
      aux_res = scalar_residual({(after.aux - before.aux) / dt, k * p.beta * h * h, -k * work}, after.aux / dt);
      nonlinear_term = nonlinear_f(phi_explicit, p) * xi;
      break;
    }
  }
  mu += nonlinear_term;

  // alpha (psi^{n+1} - psi^n)/dt + beta psi_avg - M Lap mu - g = 0
  const auto kappa = grid->wavenumber_sq();
  const double k2_max = *std::max_element(kappa.begin(), kappa.end());
  const RealField inertia = (psi1 - psi0) * (p.alpha / dt);
  const RealField damping = psi_avg * p.beta;
  const RealField diffusion = laplacian(mu) * (-M);
  const RealField force = g ? *g * (-1.0) : RealField(grid);
  const double momentum = field_residual({&inertia, &damping, &diffusion, &force}, M * k2_max * l2_norm(mu));

  return std::max({momentum, midpoint, aux_res});
}

// ---------------------------------------------------------------------------
// Energies

double discrete_energy_cn(const SchemeState& s, const ModelParams& p, double stab_s) {
  const RealField jump = s.phi_n - s.phi_nm1;
  const double j = l2_norm(jump);
  const double h = hm1_norm(s.psi_n);
  return quadratic_energy(s.phi_n) + 0.5 * stab_s * j * j + s.aux * s.aux + p.alpha / (2.0 * p.mobility) * h * h;
}

double discrete_energy_cn(const SchemeState& s, const ModelParams& p) {
  return discrete_energy_cn(s, p, s.current_s);
}

double modified_energy(SchemeKind kind, const SchemeState& s, const ModelParams& p, const SchemeParams& sp) {
  switch (kind) {
    case SchemeKind::kSav: {
      const double h = hm1_norm(s.psi_n);
      return quadratic_energy(s.phi_n) + p.alpha / (2.0 * p.mobility) * h * h + s.aux * s.aux - sp.sav_b;
    }
    case SchemeKind::kGpav:
      return s.aux * s.aux - sp.gpav_c0 * s.phi_n.grid()->volume();
    case SchemeKind::kEsav:
      return sp.esav_c * std::log(s.aux);
  }
  throw ContractViolation("modified_energy: unknown scheme");
}

Energies evaluate_energies(SchemeKind kind, const SchemeState& s, const ModelParams& p, const SchemeParams& sp) {
  Energies e;
  e.original = original_energy(s.phi_n, p);
  const double h = hm1_norm(s.psi_n);
  e.pseudo = e.original + p.alpha / (2.0 * p.mobility) * h * h;
  e.modified = modified_energy(kind, s, p, sp);
  e.discrete = kind == SchemeKind::kSav ? discrete_energy_cn(s, p) : kNaN;
  return e;
}

double monitored_energy(SchemeKind kind, const SchemeState& s, const ModelParams& p, const SchemeParams& sp,
                        MonitoredEnergy which) {
  if (which == MonitoredEnergy::kPseudo) return pseudo_energy(s.phi_n, s.psi_n, p);
  if (kind == SchemeKind::kSav) return discrete_energy_cn(s, p);
  return modified_energy(kind, s, p, sp);
}

double sav_cn_dissipation(const SchemeState& before, const SchemeState& after, const ModelParams& p, double dt) {
  const double h = hm1_norm((after.psi_n + before.psi_n) * 0.5);
  return dt * p.beta / p.mobility * h * h;
}

// ---------------------------------------------------------------------------
// Manufactured solution

namespace {

RealField manufactured_profile(const GridPtr& grid) {
  return RealField::sample(grid, [&](std::span<const double> x) {
    const auto& L = grid->length();
    double v = std::sin(8.0 * std::numbers::pi * x[0] / L[0]);
    for (std::size_t a = 1; a < x.size(); ++a) v *= std::cos(8.0 * std::numbers::pi * x[a] / L[a]);
    return v;
  });
}

}  // namespace

std::pair<RealField, RealField> manufactured_exact(const GridPtr& grid, double t) {
  const RealField x = manufactured_profile(grid);
  return {x * std::cos(t), x * (-std::sin(t))};
}

Forcing manufactured_forcing(const ModelParams& p) {
  return [p](const GridPtr& grid, double t) {
    const RealField x = manufactured_profile(grid);
    const RealField phi = x * std::cos(t);
    const RealField psi = x * (-std::sin(t));
    const RealField psi_t = x * (-std::cos(t));
    RealField mu = apply_symbol(phi, FourierSymbol::swift_hohenberg());
    mu += nonlinear_f(phi, p);
    RealField g = psi_t * p.alpha;
    g.axpy(p.beta, psi);
    g.axpy(-p.mobility, laplacian(mu));
    return g;
  };
}

}  // namespace vmpfc
