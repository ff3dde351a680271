#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "support.hpp"
#include "vmpfc/error.hpp"
#include "vmpfc/schemes.hpp"
#include "vmpfc/sim.hpp"

using namespace vmpfc;
using vmpfc::test::max_abs_diff;
using vmpfc::test::smooth_field;

namespace {

constexpr SchemeKind kAll[] = {SchemeKind::kSav, SchemeKind::kGpav, SchemeKind::kEsav};

struct Case {
  GridPtr grid = Grid::make_uniform(2, 32, 64.0);
  ModelParams p;
  SchemeParams sp;

  Case() {
    p.alpha = 0.5;
    p.epsilon = 0.9;
    p.h_vac = 3000;
    sp.stab_s = 300;
    sp.dt = 0.05;
  }

  // Two levels: bootstrap from a smooth state.
  SchemeState two_level(SchemeKind k, unsigned seed, double dt = 0.0) const {
    RealField phi0 = smooth_field(grid, seed, 0.05, 0.1);
    SchemeParams q = sp;
    if (dt > 0.0) q.dt = dt;
    SchemeState s = initial_state(k, phi0, RealField(grid), p, q);
    return bootstrap_step(k, s, p, q).state;
  }
};

}  // namespace

TEST(Extrapolation, UniformWeights) {
  EXPECT_DOUBLE_EQ(extrap_half(4.0, 2.0, 0.1, 0.1), 1.5 * 4 - 0.5 * 2);
  EXPECT_DOUBLE_EQ(extrap_full(4.0, 2.0, 0.1, 0.1), 2 * 4 - 2.0);
}

TEST(Extrapolation, LinearExactConstantPreserved) {
  const double tn = 1.0, dtn = 0.3, dtm = 0.2;
  auto lin = [](double t) { return 3.0 - 2.0 * t; };
  EXPECT_NEAR(extrap_half(lin(tn), lin(tn - dtm), dtn, dtm), lin(tn + dtn / 2), 1e-14);
  EXPECT_NEAR(extrap_full(lin(tn), lin(tn - dtm), dtn, dtm), lin(tn + dtn), 1e-14);
  EXPECT_DOUBLE_EQ(extrap_half(5.0, 5.0, 0.7, 0.1), 5.0);
  EXPECT_DOUBLE_EQ(extrap_full(5.0, 5.0, 0.7, 0.1), 5.0);

  auto g = Grid::make_uniform(1, 8, 1.0);
  RealField a(g, 2.0), b(g, 1.0);
  EXPECT_NEAR(extrap_half(a, b, 0.2, 0.1)[3], 2.0 + 0.5 * 2.0 * 1.0, 1e-15);
  EXPECT_NEAR(extrap_full(a, b, 0.2, 0.1)[3], 2.0 + 2.0, 1e-15);
}

TEST(Extrapolation, QuadraticErrorIsSecondOrder) {
  auto q = [](double t) { return std::sin(3 * t) + t * t; };
  const double tn = 0.7;
  auto err = [&](double h, bool half) {
    const double dtn = 1.3 * h, dtm = h;
    const double target = half ? tn + dtn / 2 : tn + dtn;
    const double v = half ? extrap_half(q(tn), q(tn - dtm), dtn, dtm) : extrap_full(q(tn), q(tn - dtm), dtn, dtm);
    return std::abs(v - q(target));
  };
  for (bool half : {true, false}) {
    const double ratio = err(0.01, half) / err(0.005, half);
    EXPECT_NEAR(ratio, 4.0, 0.1);
  }
}

TEST(SchemeKind, Names) {
  for (auto k : kAll) EXPECT_EQ(parse_scheme_kind(to_string(k)), k);
  EXPECT_THROW(parse_scheme_kind("bdf2"), ContractViolation);
}

TEST(InitialState, RequiresMeanZeroPsi) {
  Case c;
  RealField phi(c.grid, 0.1);
  EXPECT_THROW(initial_state(SchemeKind::kSav, phi, RealField(c.grid, 0.5), c.p, c.sp), MeanViolation);
}

TEST(Steps, CnNeedsHistory) {
  Case c;
  SchemeState s = initial_state(SchemeKind::kSav, RealField(c.grid, 0.1), RealField(c.grid), c.p, c.sp);
  EXPECT_THROW(cn_step(SchemeKind::kSav, s, c.p, c.sp, 0.1), ContractViolation);
}

TEST(Steps, UniformEquilibriumPersists) {
  Case c;
  for (auto k : kAll) {
    for (double level : {0.2, -0.3}) {
      RealField phi(c.grid, level);
      SchemeState s = initial_state(k, phi, RealField(c.grid), c.p, c.sp);
      StepOptions o;
      o.check_residual = true;
      StepReport b = bootstrap_step(k, s, c.p, c.sp, {}, o);
      EXPECT_LT(max_abs_diff(b.state.phi_n, phi), 1e-13) << to_string(k);
      EXPECT_LT(b.state.psi_n.max_abs(), 1e-12);
      EXPECT_LE(*b.residual, 1e-12);
      StepReport n = cn_step(k, b.state, c.p, c.sp, 0.1, {}, o);
      EXPECT_LT(max_abs_diff(n.state.phi_n, phi), 1e-13) << to_string(k);
      EXPECT_LE(*n.residual, 1e-12);
      if (k != SchemeKind::kSav) {
        EXPECT_NEAR(b.state.aux, s.aux, 1e-12 * s.aux);
        EXPECT_NEAR(n.state.aux, s.aux, 1e-12 * s.aux);
      }
    }
  }
}

TEST(Steps, MassConservedAndPsiMeanZero) {
  Case c;
  for (auto k : kAll) {
    SchemeState s = c.two_level(k, 3);
    const double m0 = mean(s.phi_n);
    for (int i = 0; i < 10; ++i) {
      s = cn_step(k, s, c.p, c.sp, 0.2).state;
      EXPECT_NEAR(mean(s.phi_n), m0, 1e-12 * std::max(1.0, std::abs(m0)));
      EXPECT_LE(std::abs(mean(s.psi_n)), 1e-10);
    }
  }
}

TEST(Steps, ResidualOracle) {
  Case c;
  StepOptions o;
  o.check_residual = true;
  for (auto k : kAll) {
    for (unsigned seed = 1; seed <= 4; ++seed) {
      SchemeState s = c.two_level(k, seed);
      StepReport r = cn_step(k, s, c.p, c.sp, 0.1 * seed, {}, o);
      EXPECT_LE(*r.residual, 1e-9) << to_string(k) << " seed " << seed;
      // the oracle is not blind: perturbing the output is detected
      SchemeState bad = r.state;
      bad.phi_n[7] += 1e-4;
      bad.phi_n[8] -= 1e-4;
      EXPECT_GT(scheme_residual(k, false, s, bad, c.p, c.sp, 0.1 * seed), 1e-7);
    }
  }
}

TEST(Sav, EnergyLawPerStep) {
  Case c;
  for (double dt : {2.0, 1.0, 0.5, 0.1}) {
    // uniform steps: the S term only telescopes when dt does not change
    SchemeState s = c.two_level(SchemeKind::kSav, 5, dt);
    for (int i = 0; i < 5; ++i) {
      StepReport r = cn_step(SchemeKind::kSav, s, c.p, c.sp, dt);
      const double e0 = discrete_energy_cn(s, c.p, c.sp.stab_s);
      const double e1 = discrete_energy_cn(r.state, c.p, c.sp.stab_s);
      const double diss = sav_cn_dissipation(s, r.state, c.p, dt);
      EXPECT_GE(diss, 0.0);
      EXPECT_LE(e1, e0 - diss + 1e-9 * std::abs(e0));
      s = r.state;
    }
  }
}

TEST(Gpav, AuxPositiveNonincreasing) {
  Case c;
  RealField phi0 = smooth_field(c.grid, 6, 0.05, 0.1);
  SchemeState s = initial_state(SchemeKind::kGpav, phi0, RealField(c.grid), c.p, c.sp);
  SchemeState b = bootstrap_step(SchemeKind::kGpav, s, c.p, c.sp).state;
  EXPECT_GT(b.aux, 0.0);
  EXPECT_LE(b.aux, s.aux);
  for (int i = 0; i < 10; ++i) {
    SchemeState n = cn_step(SchemeKind::kGpav, b, c.p, c.sp, 0.5).state;
    EXPECT_GT(n.aux, 0.0);
    EXPECT_LE(n.aux, b.aux * (1 + 1e-15));
    b = n;
  }
}

TEST(Esav, AuxPositiveNonincreasingAndXi) {
  Case c;
  RealField z(c.grid);
  SchemeState s0 = initial_state(SchemeKind::kEsav, z, z, c.p, c.sp);
  EXPECT_EQ(s0.aux, 1.0);
  EXPECT_EQ(bootstrap_step(SchemeKind::kEsav, s0, c.p, c.sp).xi, 1.0);

  c.sp.esav_c = 1e13;
  SchemeState s = c.two_level(SchemeKind::kEsav, 7, 0.5);
  for (int i = 0; i < 10; ++i) {
    SchemeState n = cn_step(SchemeKind::kEsav, s, c.p, c.sp, 0.5).state;
    EXPECT_GT(n.aux, 0.0);
    EXPECT_LE(n.aux, s.aux);
    EXPECT_LE(modified_energy(SchemeKind::kEsav, n, c.p, c.sp), modified_energy(SchemeKind::kEsav, s, c.p, c.sp));
    s = n;
  }
}

TEST(Esav, SmallCIsScalingError) {
  Case c;
  c.sp.esav_c = 1e-6;
  RealField phi0 = smooth_field(c.grid, 8, 0.05, 0.3);
  EXPECT_THROW(initial_state(SchemeKind::kEsav, phi0, RealField(c.grid), c.p, c.sp), ScalingError);
}

TEST(Energies, TrivialValues) {
  Case c;
  RealField z(c.grid);
  SchemeState sav = initial_state(SchemeKind::kSav, z, z, c.p, c.sp);
  EXPECT_DOUBLE_EQ(sav.aux, 100.0);
  EXPECT_DOUBLE_EQ(discrete_energy_cn(sav, c.p), 1e4);
  EXPECT_DOUBLE_EQ(discrete_energy_cn(sav, c.p, 0.0), 1e4);
  EXPECT_EQ(modified_energy(SchemeKind::kSav, sav, c.p, c.sp), 0.0);

  RealField phi0 = smooth_field(c.grid, 9, 0.05, 0.1);
  const double e = pseudo_energy(phi0, z, c.p);
  SchemeState gp = initial_state(SchemeKind::kGpav, phi0, z, c.p, c.sp);
  EXPECT_NEAR(modified_energy(SchemeKind::kGpav, gp, c.p, c.sp), e, 1e-8 * gp.aux * gp.aux);
  SchemeState es = initial_state(SchemeKind::kEsav, phi0, z, c.p, c.sp);
  EXPECT_NEAR(modified_energy(SchemeKind::kEsav, es, c.p, c.sp), e, 1e-6 * std::max(1.0, std::abs(e)));
  EXPECT_TRUE(std::isnan(evaluate_energies(SchemeKind::kGpav, gp, c.p, c.sp).discrete));
}

TEST(Energies, HistoryTermOnlyWithS) {
  Case c;
  SchemeState s = c.two_level(SchemeKind::kSav, 10);
  const double with = discrete_energy_cn(s, c.p, 100.0);
  const double without = discrete_energy_cn(s, c.p, 0.0);
  const double d = l2_norm(s.phi_n - s.phi_nm1);
  EXPECT_NEAR(with - without, 50.0 * d * d, 1e-9 * with);
}

TEST(Manufactured, ExactAtQuarterPeriod) {
  auto g = Grid::make_uniform(2, 32, 128.0);
  auto [phi, psi] = manufactured_exact(g, std::numbers::pi / 2);
  EXPECT_LT(phi.max_abs(), 1e-15);
  RealField expect = RealField::sample(g, [](std::span<const double> x) {
    return -std::sin(std::numbers::pi * x[0] / 16) * std::cos(std::numbers::pi * x[1] / 16);
  });
  EXPECT_LT(max_abs_diff(psi, expect), 1e-15);
}

// The forcing evaluated on a coarse grid agrees with the 256^2 evaluation at
// shared grid points (band-limited when h_vac = 0).
TEST(Manufactured, ForcingMatchesFineGrid) {
  ModelParams p;
  p.epsilon = 0.025;
  auto coarse = Grid::make_uniform(2, 64, 128.0);
  auto fine = Grid::make_uniform(2, 256, 128.0);
  const Forcing f = manufactured_forcing(p);
  for (double t : {0.0, 0.3}) {
    RealField gc = f(coarse, t), gf = f(fine, t);
    double worst = 0;
    for (int i = 0; i < 64; ++i)
      for (int j = 0; j < 64; ++j) worst = std::max(worst, std::abs(gc[i * 64 + j] - gf[(4 * i) * 256 + 4 * j]));
    EXPECT_LT(worst, 1e-10);
  }
  // (x, y, t) = (32, 0, 0): sin(2 pi) = 0 and psi_e = 0, so g vanishes
  EXPECT_NEAR(f(fine, 0.0)[64 * 256], 0.0, 1e-12);
  // at (8, 0, t) the profile is 1 with zero gradient, so the forcing has a closed form
  const double k = std::numbers::pi / 16, t = 0.3, co = std::cos(t);
  const double lap_mu = (1 - 2 * k * k) * (1 - 2 * k * k) * (-2 * k * k) * co - 6 * k * k * co * co * co +
                        p.epsilon * 2 * k * k * co;
  EXPECT_NEAR(f(fine, t)[16 * 256], -co - std::sin(t) - lap_mu, 1e-10);
}

TEST(Manufactured, BootstrapLocalErrorSecondOrder) {
  auto g = Grid::make_uniform(2, 32, 128.0);
  ModelParams p;
  p.epsilon = 0.025;
  p.h_vac = 500;
  const Forcing f = manufactured_forcing(p);
  for (auto k : kAll) {
    auto err = [&](double dt) {
      SchemeParams sp;
      sp.stab_s = 1;
      sp.dt = dt;
      auto [phi0, psi0] = manufactured_exact(g, 0.0);
      SchemeState s = initial_state(k, phi0, psi0, p, sp);
      StepReport r = bootstrap_step(k, s, p, sp, f);
      return l2_norm(r.state.phi_n - manufactured_exact(g, dt).first);
    };
    const double ratio = err(0.05) / err(0.025);
    EXPECT_GT(ratio, 3.0) << to_string(k);
    EXPECT_LT(ratio, 5.0) << to_string(k);
  }
}

TEST(Manufactured, XiDeviationSecondOrder) {
  auto g = Grid::make_uniform(2, 32, 128.0);
  ModelParams p;
  p.epsilon = 0.025;
  const Forcing f = manufactured_forcing(p);
  for (auto k : {SchemeKind::kGpav, SchemeKind::kEsav}) {
    auto dev = [&](double dt) {
      SchemeParams sp;
      sp.stab_s = 1;
      sp.dt = dt;
      auto [phi0, psi0] = manufactured_exact(g, 0.0);
      double worst = 0;
      FixedRunOptions o;
      o.T = 1;
      o.forcing = f;
      o.observer = [&](const SchemeState& before, const StepReport& r) {
        if (before.step_index > 0) worst = std::max(worst, std::abs(r.xi - 1.0));
      };
      run_fixed(k, phi0, psi0, p, sp, o).rethrow_if_failed();
      return worst;
    };
    const double ratio = dev(0.05) / dev(0.025);
    EXPECT_GT(ratio, 3.0) << to_string(k);
    EXPECT_LT(ratio, 5.0) << to_string(k);
  }
}
