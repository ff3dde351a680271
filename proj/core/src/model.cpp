#include "vmpfc/model.hpp"

#include <cmath>
#include <sstream>

#include "vmpfc/error.hpp"

namespace vmpfc {

namespace {

// exp() overflows just above 709.78
constexpr double kMaxExponent = 700.0;

std::string num(double v) {
  std::ostringstream os;
  os.precision(10);
  os << v;
  return os.str();
}

template <class Fn>
RealField pointwise(const RealField& phi, Fn&& fn) {
  RealField out(phi.grid());
  for (std::size_t i = 0; i < phi.size(); ++i) out[i] = fn(phi[i]);
  return out;
}

}  // namespace

std::vector<std::string> ModelParams::validate() const {
  if (!(mobility > 0.0)) throw ContractViolation("model: mobility must be > 0");
  if (!(alpha >= 0.0)) throw ContractViolation("model: alpha must be >= 0");
  if (!(beta >= 0.0)) throw ContractViolation("model: beta must be >= 0");
  if (!(h_vac >= 0.0)) throw ContractViolation("model: h_vac must be >= 0");
  if (!(epsilon > 0.0 && epsilon <= 1.0)) throw ContractViolation("model: epsilon must lie in (0, 1]");
  if (alpha == 0.0 && beta == 0.0) throw ContractViolation("model: alpha and beta cannot both vanish");
  std::vector<std::string> warnings;
  if (epsilon >= 1.0) warnings.emplace_back("epsilon = 1 sits on the boundary of the usual range (0, 1)");
  return warnings;
}

void SchemeParams::validate() const {
  if (!(stab_s >= 0.0)) throw ContractViolation("scheme: S must be >= 0");
  if (!(sav_b > 0.0)) throw ContractViolation("scheme: b must be > 0");
  if (!(esav_c > 0.0)) throw ContractViolation("scheme: C must be > 0");
  if (!(dt > 0.0)) throw ContractViolation("scheme: dt must be > 0");
}

RealField double_well_f(const RealField& phi, const ModelParams& p) {
  return pointwise(phi, [eps = p.epsilon](double v) { return v * v * v - eps * v; });
}

RealField double_well_F(const RealField& phi, const ModelParams& p) {
  return pointwise(phi, [eps = p.epsilon](double v) {
    const double v2 = v * v;
    return 0.25 * v2 * v2 - 0.5 * eps * v2;
  });
}

RealField vacancy_f(const RealField& phi, const ModelParams& p) {
  return pointwise(phi, [h = p.h_vac](double v) { return h * (std::abs(v) - v) * v; });
}

RealField vacancy_F(const RealField& phi, const ModelParams& p) {
  return pointwise(phi, [h = p.h_vac](double v) {
    const double a = std::abs(v);
    return h / 3.0 * (a * a * a - v * v * v);
  });
}

RealField nonlinear_f(const RealField& phi, const ModelParams& p) {
  return pointwise(phi, [eps = p.epsilon, h = p.h_vac](double v) {
    return v * v * v - eps * v + h * (std::abs(v) - v) * v;
  });
}

double nonlinear_energy(const RealField& phi, const ModelParams& p) {
  double s = 0.0;
  for (double v : phi.values()) {
    const double v2 = v * v;
    const double a = std::abs(v);
    s += 0.25 * v2 * v2 - 0.5 * p.epsilon * v2 + p.h_vac / 3.0 * (a * a * a - v2 * v);
  }
  return s * phi.grid()->cell_volume();
}

double quadratic_energy(const RealField& phi) {
  const SpectralField c = to_spectral(phi);
  return 0.5 * std::pow(l2_norm(apply_symbol(c, {"1+laplacian", [](double k2) { return 1.0 - k2; }})), 2);
}

double quadratic_energy_expanded(const RealField& phi) {
  const SpectralField c = to_spectral(phi);
  const double lap = l2_norm(apply_symbol(c, FourierSymbol::laplacian()));
  // ||grad phi||^2 = (-Laplacian phi, phi)
  const double grad_sq = l2_inner(apply_symbol(c, {"-laplacian", [](double k2) { return k2; }}), c);
  const double l2 = l2_norm(phi);
  return 0.5 * lap * lap - grad_sq + 0.5 * l2 * l2;
}

double original_energy(const RealField& phi, const ModelParams& p) {
  return quadratic_energy(phi) + nonlinear_energy(phi, p);
}

double original_energy_expanded(const RealField& phi, const ModelParams& p) {
  return quadratic_energy_expanded(phi) + nonlinear_energy(phi, p);
}

double pseudo_energy(const RealField& phi, const RealField& psi, const ModelParams& p) {
  const double h = hm1_norm(psi);
  return original_energy(phi, p) + p.alpha / (2.0 * p.mobility) * h * h;
}

double gpav_E1(const RealField& phi, const RealField& psi, const ModelParams& p, const SchemeParams& sp) {
  const double e1 = pseudo_energy(phi, psi, p) + sp.gpav_c0 * phi.grid()->volume();
  if (!std::isfinite(e1)) throw NumericalFailure("GPAV energy E1 is not finite");
  if (!(e1 > 0.0)) {
    throw ShiftTooSmall("GPAV energy E1 = " + num(e1) + " is not positive; increase c0 above " +
                        num(sp.gpav_c0 - e1 / phi.grid()->volume()));
  }
  return e1;
}

double sav_u_init(const RealField& phi0, const ModelParams& p, const SchemeParams& sp) {
  const double radicand = nonlinear_energy(phi0, p) + sp.sav_b;
  if (!std::isfinite(radicand)) throw NumericalFailure("SAV radicand is not finite");
  if (!(radicand > 0.0)) {
    throw ShiftTooSmall("SAV radicand " + num(radicand) + " is not positive; increase b above " +
                        num(sp.sav_b - radicand));
  }
  return std::sqrt(radicand);
}

RealField sav_H(const RealField& phi, const ModelParams& p, const SchemeParams& sp) {
  RealField h = nonlinear_f(phi, p);
  h *= 1.0 / sav_u_init(phi, p, sp);
  return h;
}

double gpav_R_init(const RealField& phi0, const RealField& psi0, const ModelParams& p, const SchemeParams& sp) {
  return std::sqrt(gpav_E1(phi0, psi0, p, sp));
}

double esav_exp(double energy, double esav_c) {
  const double x = energy / esav_c;
  if (std::isnan(x)) throw NumericalFailure("ESAV energy is not finite");
  if (!(x < kMaxExponent)) {
    throw ScalingError("exp(E/C) overflows for E = " + num(energy) + ", C = " + num(esav_c) +
                       "; increase C to at least " + num(energy));
  }
  return std::exp(x);
}

double esav_B_init(const RealField& phi0, const RealField& psi0, const ModelParams& p, const SchemeParams& sp) {
  return esav_exp(pseudo_energy(phi0, psi0, p), sp.esav_c);
}

}  // namespace vmpfc
