#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <thread>

#include "support.hpp"
#include "vmpfc/error.hpp"
#include "vmpfc/spectral.hpp"

using namespace vmpfc;
using vmpfc::test::max_abs_diff;
using vmpfc::test::random_field;
using vmpfc::test::random_mean_zero;

namespace {

constexpr double kPi = std::numbers::pi;

RealField sine_x(const GridPtr& g) {
  const double L = g->length()[0];
  return RealField::sample(g, [L](std::span<const double> x) { return std::sin(2 * kPi * x[0] / L); });
}

}  // namespace

TEST(Grid, RejectsBadShapes) {
  EXPECT_THROW(Grid::make({2}, {1.0}), ContractViolation);
  EXPECT_THROW(Grid::make({6, 7}, {1.0, 1.0}), ContractViolation);
  EXPECT_THROW(Grid::make({8}, {0.0}), ContractViolation);
  EXPECT_THROW(Grid::make({8, 8}, {1.0}), ContractViolation);
  EXPECT_THROW(Grid::make({8, 8, 8, 8}, {1, 1, 1, 1}), ContractViolation);
}

TEST(Grid, Sizes) {
  auto g = Grid::make({8, 16, 4}, {1.0, 2.0, 3.0});
  EXPECT_EQ(g->size(), 8u * 16 * 4);
  EXPECT_EQ(g->spectral_size(), 8u * 16 * 3);
  EXPECT_DOUBLE_EQ(g->volume(), 6.0);
  EXPECT_DOUBLE_EQ(g->cell_volume(), 6.0 / (8 * 16 * 4));
}

TEST(Transform, ConstantHasOnlyZeroMode) {
  auto g = Grid::make_uniform(2, 16, 10.0);
  RealField c(g, 2.5);
  SpectralField s = to_spectral(c);
  EXPECT_NEAR(s[0].real(), 2.5 * 256, 1e-12);
  for (std::size_t i = 1; i < s.size(); ++i) EXPECT_LT(std::abs(s[i]), 1e-12);
  EXPECT_LT(max_abs_diff(to_physical(s), c), 1e-14);
}

TEST(Transform, PureSineIsOneModePair) {
  auto g = Grid::make({64}, {3.0});
  SpectralField s = to_spectral(sine_x(g));
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i == 1) {
      // forward unnormalized: sin -> -i N/2 at m = 1
      EXPECT_NEAR(s[i].imag(), -32.0, 1e-12);
      EXPECT_NEAR(s[i].real(), 0.0, 1e-12);
    } else {
      EXPECT_LT(std::abs(s[i]), 1e-12) << i;
    }
  }
}

TEST(Transform, RandomRoundTrip) {
  for (int dim = 1; dim <= 3; ++dim) {
    auto g = Grid::make_uniform(dim, dim == 3 ? 8 : 32, 7.0);
    RealField f = random_field(g, 11 + dim);
    EXPECT_LT(max_abs_diff(to_physical(to_spectral(f)), f), 1e-12);
  }
}

TEST(Transform, GridMismatchIsContractViolation) {
  auto a = Grid::make_uniform(1, 8, 1.0);
  auto b = Grid::make_uniform(1, 16, 1.0);
  EXPECT_THROW(l2_inner(RealField(a), RealField(b)), ContractViolation);
  EXPECT_THROW(RealField(a, std::vector<double>(5, 0.0)), ContractViolation);
}

TEST(ApplySymbol, LaplacianEigenfunction) {
  auto g = Grid::make_uniform(2, 32, 5.0);
  RealField f = sine_x(g);
  RealField lap = apply_symbol(f, FourierSymbol::laplacian());
  const double k2 = std::pow(2 * kPi / 5.0, 2);
  EXPECT_LT(max_abs_diff(lap, f * (-k2)), 1e-12);
  EXPECT_LT(max_abs_diff(laplacian(f), f * (-k2)), 1e-12);
}

TEST(ApplySymbol, IdentityAndRoot) {
  auto g = Grid::make_uniform(1, 32, 2 * kPi);
  RealField f = sine_x(g);
  EXPECT_LT(max_abs_diff(apply_symbol(f, FourierSymbol::identity()), f), 1e-14);
  EXPECT_LT(apply_symbol(f, FourierSymbol::swift_hohenberg()).max_abs(), 1e-10);
}

TEST(ApplySymbol, Linear) {
  auto g = Grid::make_uniform(2, 16, 3.0);
  RealField f = random_field(g, 1), h = random_field(g, 2);
  const auto s = FourierSymbol::swift_hohenberg();
  RealField lhs = apply_symbol(f * 2.0 + h * (-3.0), s);
  RealField rhs = apply_symbol(f, s) * 2.0 + apply_symbol(h, s) * (-3.0);
  EXPECT_LT(max_abs_diff(lhs, rhs), 1e-9 * rhs.max_abs());
}

TEST(InvLaplacian, Eigenfunction) {
  auto g = Grid::make_uniform(2, 32, 9.0);
  RealField f = sine_x(g);
  const double k2 = std::pow(2 * kPi / 9.0, 2);
  EXPECT_LT(max_abs_diff(inv_laplacian(f * (-k2)), f), 1e-12);
  EXPECT_LT(inv_laplacian(RealField(g)).max_abs(), 1e-300);
}

TEST(InvLaplacian, RoundTripAndZeroMean) {
  auto g = Grid::make_uniform(2, 32, 9.0);
  RealField f = random_mean_zero(g, 5);
  RealField u = inv_laplacian(f);
  EXPECT_LT(std::abs(mean(u)), 1e-15);
  EXPECT_LT(max_abs_diff(laplacian(u), f), 1e-10 * f.max_abs());
}

TEST(InvLaplacian, MeanViolationCarriesMean) {
  auto g = Grid::make_uniform(1, 16, 1.0);
  RealField f(g, 0.5);
  try {
    inv_laplacian(f);
    FAIL();
  } catch (const MeanViolation& e) {
    EXPECT_NEAR(e.measured_mean(), 0.5, 1e-15);
  }
}

TEST(Inner, NormsAndMean) {
  const double L = 6.0;
  auto g = Grid::make_uniform(2, 32, L);
  EXPECT_NEAR(l2_norm(sine_x(g)), std::sqrt(L * L / 2), 1e-12);
  EXPECT_DOUBLE_EQ(mean(RealField(g, -1.25)), -1.25);
}

TEST(Inner, Parseval) {
  auto g = Grid::make({16, 8, 4}, {1.0, 2.0, 3.5});
  RealField f = random_field(g, 7), h = random_field(g, 8);
  const double phys = l2_inner(f, h);
  EXPECT_NEAR(l2_inner(to_spectral(f), to_spectral(h)), phys, 1e-12 * std::abs(phys) + 1e-13);
  EXPECT_NEAR(l2_norm(to_spectral(f)), l2_norm(f), 1e-12 * l2_norm(f));
}

TEST(Inner, LaplacianSelfAdjoint) {
  auto g = Grid::make_uniform(2, 32, 4.0);
  RealField f = random_field(g, 3), h = random_field(g, 4);
  const double a = l2_inner(laplacian(f), h);
  const double b = l2_inner(f, laplacian(h));
  EXPECT_NEAR(a, b, 1e-11 * std::abs(a));
}

TEST(Hm1, SingleMode) {
  const double L = 10.0;
  auto g = Grid::make_uniform(2, 32, L);
  EXPECT_NEAR(hm1_norm(sine_x(g)), L / (2 * kPi) * std::sqrt(L * L / 2), 1e-11);
  EXPECT_EQ(hm1_norm(RealField(g)), 0.0);
}

TEST(Hm1, MatchesDefinition) {
  auto g = Grid::make_uniform(2, 32, 12.0);
  RealField f = random_mean_zero(g, 9), h = random_mean_zero(g, 10);
  const double direct = std::sqrt(l2_inner(inv_laplacian(f) * -1.0, f));
  EXPECT_NEAR(hm1_norm(f), direct, 1e-12 * direct);
  EXPECT_NEAR(hm1_norm_sq(to_spectral(f)), direct * direct, 1e-12 * direct * direct);
  const double a = hm1_inner(f, h);
  EXPECT_NEAR(a, l2_inner(inv_laplacian(f) * -1.0, h), 1e-12 * std::abs(a) + 1e-14);
  EXPECT_NEAR(a, l2_inner(f, inv_laplacian(h) * -1.0), 1e-12 * std::abs(a) + 1e-14);
}

TEST(Hm1, NonzeroMeanThrows) {
  auto g = Grid::make_uniform(1, 16, 1.0);
  EXPECT_THROW(hm1_norm(RealField(g, 1.0)), MeanViolation);
}

TEST(SolveSymbol, Constant) {
  auto g = Grid::make_uniform(2, 16, 3.0);
  RealField f = random_field(g, 1);
  EXPECT_LT(max_abs_diff(solve_symbol(f, FourierSymbol::constant(2.0)), f * 0.5), 1e-14);
}

TEST(SolveSymbol, EigenCase) {
  const double L = 7.0;
  auto g = Grid::make_uniform(2, 32, L);
  const double k2 = std::pow(2 * kPi / L, 2);
  FourierSymbol s{"1+k2", [](double k) { return 1.0 + k; }};
  RealField rhs = sine_x(g) * (1 + k2);
  EXPECT_LT(max_abs_diff(solve_symbol(rhs, s), sine_x(g)), 1e-13);
}

TEST(SolveSymbol, RandomResidual) {
  auto g = Grid::make_uniform(2, 32, 20.0);
  FourierSymbol s{"p", [](double k) { return 3.0 + 0.5 * k * (1 - k) * (1 - k) + 2.0 * k; }};
  RealField rhs = random_field(g, 12);
  RealField u = solve_symbol(rhs, s);
  EXPECT_LE(l2_norm(apply_symbol(u, s) - rhs), 1e-10 * l2_norm(rhs));
}

TEST(SolveSymbol, SingularNamesMode) {
  auto g = Grid::make_uniform(1, 16, 2 * kPi);
  FourierSymbol s{"1-k2", [](double k) { return 1.0 - k; }};
  try {
    solve_symbol(random_field(g, 1), s);
    FAIL();
  } catch (const SingularOperator& e) {
    EXPECT_EQ(e.mode_index(), 1);
  }
  FourierSymbol lap{"k2", [](double k) { return k; }};
  EXPECT_THROW(check_positive(*g, lap), SingularOperator);
  EXPECT_NO_THROW(check_positive(*g, lap, ZeroMode::kSkip));
  EXPECT_NO_THROW(solve_symbol(random_mean_zero(g, 2), lap, ZeroMode::kSkip));
}

TEST(Concurrency, SharedGridAcrossThreads) {
  auto g = Grid::make_uniform(2, 32, 4.0);
  RealField f = random_field(g, 21);
  const RealField ref = laplacian(f);
  std::vector<double> errs(4, 1.0);
  std::vector<std::thread> ts;
  for (int i = 0; i < 4; ++i) {
    ts.emplace_back([&, i] {
      double e = 0;
      for (int k = 0; k < 50; ++k) e = std::max(e, max_abs_diff(laplacian(f), ref));
      errs[i] = e;
    });
  }
  for (auto& t : ts) t.join();
  for (double e : errs) EXPECT_EQ(e, 0.0);
}
