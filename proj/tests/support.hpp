#pragma once

#include <cmath>
#include <numbers>
#include <random>

#include "vmpfc/spectral.hpp"

namespace vmpfc::test {

inline RealField random_field(const GridPtr& g, unsigned seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-scale, scale);
  RealField f(g);
  for (double& v : f.values()) v = u(rng);
  return f;
}

inline RealField random_mean_zero(const GridPtr& g, unsigned seed, double scale = 1.0) {
  RealField f = random_field(g, seed, scale);
  const double m = mean(f);
  for (double& v : f.values()) v -= m;
  return f;
}

// Low-wavenumber random field: a few Fourier modes with random amplitudes.
inline RealField smooth_field(const GridPtr& g, unsigned seed, double offset, double scale) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  struct Mode {
    int mx, my;
    double a, phase;
  };
  std::vector<Mode> modes;
  for (int i = 0; i < 6; ++i) modes.push_back({1 + i % 3, i / 2, u(rng), std::numbers::pi * u(rng)});
  const auto& L = g->length();
  return RealField::sample(g, [&](std::span<const double> x) {
    double s = offset;
    for (const auto& m : modes) {
      double arg = 2 * std::numbers::pi * m.mx * x[0] / L[0] + m.phase;
      if (x.size() > 1) arg += 2 * std::numbers::pi * m.my * x[1] / L[1];
      s += scale * m.a * std::sin(arg);
    }
    return s;
  });
}

inline double max_abs_diff(const RealField& a, const RealField& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace vmpfc::test
