#include "vmpfc/spectral.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numbers>
#include <numeric>
#include <sstream>

#include "vmpfc/error.hpp"

namespace vmpfc {

namespace {

// FFTW planning is not thread-safe; execution with the new-array interface is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

void require_same_grid(const GridPtr& a, const GridPtr& b, const char* op) {
  if (a.get() != b.get() && !a->same_as(*b)) {
    throw ContractViolation(std::string(op) + ": fields live on different grids");
  }
}

fftw_complex* as_fftw(std::complex<double>* p) { return reinterpret_cast<fftw_complex*>(p); }

}  // namespace

MeanViolation::MeanViolation(double measured_mean, double tolerance)
    : Error([&] {
        std::ostringstream os;
        os.precision(17);
        os << "field must be mean-zero: measured mean " << measured_mean << " exceeds tolerance "
           << tolerance;
        return os.str();
      }()),
      mean_(measured_mean) {}

SingularOperator::SingularOperator(const std::string& symbol, std::int64_t mode_index, double value)
    : Error("symbol '" + symbol + "' is not strictly positive at spectral index " +
            std::to_string(mode_index) + " (value " + std::to_string(value) + ")"),
      mode_(mode_index) {}

ConfigError::ConfigError(std::string key, const std::string& message)
    : Error(key.empty() ? message : key + ": " + message), key_(std::move(key)) {}

// ---------------------------------------------------------------------------
// Grid

GridPtr Grid::make(std::vector<int> n_per_axis, std::vector<double> length_per_axis) {
  return GridPtr(new Grid(std::move(n_per_axis), std::move(length_per_axis)));
}

GridPtr Grid::make_uniform(int dim, int n, double length) {
  if (dim < 1 || dim > 3) {
    throw ContractViolation("grid dimension must be 1, 2 or 3");
  }
  return make(std::vector<int>(dim, n), std::vector<double>(dim, length));
}

Grid::Grid(std::vector<int> n, std::vector<double> length) : n_(std::move(n)), length_(std::move(length)) {
  if (n_.empty() || n_.size() > 3) {
    throw ContractViolation("grid dimension must be 1, 2 or 3");
  }
  if (length_.size() != n_.size()) {
    throw ContractViolation("grid: n_per_axis and length_per_axis differ in length");
  }
  for (std::size_t a = 0; a < n_.size(); ++a) {
    if (n_[a] < 4 || n_[a] % 2 != 0) {
      throw ContractViolation("grid: points per axis must be even and >= 4");
    }
    if (!(length_[a] > 0.0) || !std::isfinite(length_[a])) {
      throw ContractViolation("grid: edge lengths must be positive");
    }
  }

  const int d = dim();
  real_size_ = 1;
  volume_ = 1.0;
  for (int a = 0; a < d; ++a) {
    real_size_ *= static_cast<std::size_t>(n_[a]);
    volume_ *= length_[a];
  }
  cell_volume_ = volume_ / static_cast<double>(real_size_);

  const int last_half = n_[d - 1] / 2 + 1;
  spectral_size_ = real_size_ / static_cast<std::size_t>(n_[d - 1]) * static_cast<std::size_t>(last_half);

  kappa_.resize(spectral_size_);
  weight_.resize(spectral_size_);
  for (std::size_t idx = 0; idx < spectral_size_; ++idx) {
    const auto m = mode_of(idx);
    double k2 = 0.0;
    for (int a = 0; a < d; ++a) {
      const double k = 2.0 * std::numbers::pi * m[a] / length_[a];
      k2 += k * k;
    }
    kappa_[idx] = k2;
    const int m_last = m[d - 1];
    weight_[idx] = (m_last == 0 || m_last == -n_[d - 1] / 2) ? 1.0 : 2.0;
  }

  std::vector<int> dims(n_.begin(), n_.end());
  std::lock_guard lock(planner_mutex());
  double* r = fftw_alloc_real(real_size_);
  fftw_complex* c = fftw_alloc_complex(spectral_size_);
  const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
  forward_plan_ = fftw_plan_dft_r2c(d, dims.data(), r, c, flags);
  inverse_plan_ = fftw_plan_dft_c2r(d, dims.data(), c, r, flags);
  fftw_free(r);
  fftw_free(c);
  if (forward_plan_ == nullptr || inverse_plan_ == nullptr) {
    throw Error("FFTW failed to create plans");
  }
}

Grid::~Grid() {
  std::lock_guard lock(planner_mutex());
  if (forward_plan_ != nullptr) fftw_destroy_plan(static_cast<fftw_plan>(forward_plan_));
  if (inverse_plan_ != nullptr) fftw_destroy_plan(static_cast<fftw_plan>(inverse_plan_));
}

std::vector<int> Grid::mode_of(std::size_t spectral_index) const {
  const int d = dim();
  std::vector<int> m(d);
  std::size_t rest = spectral_index;
  const std::size_t last_half = static_cast<std::size_t>(n_[d - 1] / 2 + 1);
  // last axis holds only non-negative frequencies 0..N/2; N/2 is reported as -N/2
  const int j_last = static_cast<int>(rest % last_half);
  rest /= last_half;
  m[d - 1] = (j_last == n_[d - 1] / 2) ? -j_last : j_last;
  for (int a = d - 2; a >= 0; --a) {
    const int j = static_cast<int>(rest % static_cast<std::size_t>(n_[a]));
    rest /= static_cast<std::size_t>(n_[a]);
    m[a] = (j >= n_[a] / 2) ? j - n_[a] : j;
  }
  return m;
}

void Grid::coordinates(std::size_t flat, std::span<double> out) const {
  const int d = dim();
  for (int a = d - 1; a >= 0; --a) {
    const auto na = static_cast<std::size_t>(n_[a]);
    out[a] = static_cast<double>(flat % na) * spacing(a);
    flat /= na;
  }
}

void Grid::forward(std::span<const double> in, std::span<std::complex<double>> out) const {
  if (in.size() != real_size_ || out.size() != spectral_size_) {
    throw ContractViolation("forward transform: buffer size does not match grid");
  }
  // r2c transforms leave their input untouched
  fftw_execute_dft_r2c(static_cast<fftw_plan>(forward_plan_), const_cast<double*>(in.data()),
                       as_fftw(out.data()));
}

void Grid::inverse(std::span<const std::complex<double>> in, std::span<double> out) const {
  if (in.size() != spectral_size_ || out.size() != real_size_) {
    throw ContractViolation("inverse transform: buffer size does not match grid");
  }
  std::vector<std::complex<double>> scratch(in.begin(), in.end());
  fftw_execute_dft_c2r(static_cast<fftw_plan>(inverse_plan_), as_fftw(scratch.data()), out.data());
  const double scale = 1.0 / static_cast<double>(real_size_);
  for (double& v : out) v *= scale;
}

bool Grid::same_as(const Grid& other) const noexcept {
  return n_ == other.n_ && length_ == other.length_;
}

// ---------------------------------------------------------------------------
// Fields

RealField::RealField(GridPtr grid) : grid_(std::move(grid)) {
  if (!grid_) throw ContractViolation("RealField: null grid");
  values_.assign(grid_->size(), 0.0);
}

RealField::RealField(GridPtr grid, std::vector<double> values) : grid_(std::move(grid)), values_(std::move(values)) {
  if (!grid_) throw ContractViolation("RealField: null grid");
  if (values_.size() != grid_->size()) {
    throw ContractViolation("RealField: " + std::to_string(values_.size()) + " values for a grid of " +
                            std::to_string(grid_->size()) + " points");
  }
}

RealField::RealField(GridPtr grid, double constant) : grid_(std::move(grid)) {
  if (!grid_) throw ContractViolation("RealField: null grid");
  values_.assign(grid_->size(), constant);
}

RealField RealField::sample(GridPtr grid, const std::function<double(std::span<const double>)>& fn) {
  RealField f(grid);
  std::vector<double> x(grid->dim());
  for (std::size_t i = 0; i < f.size(); ++i) {
    grid->coordinates(i, x);
    f[i] = fn(x);
  }
  return f;
}

bool RealField::all_finite() const noexcept {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

double RealField::max_abs() const noexcept {
  double m = 0.0;
  for (double v : values_) m = std::max(m, std::abs(v));
  return m;
}

RealField& RealField::operator+=(const RealField& other) {
  require_same_grid(grid_, other.grid_, "RealField +=");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += other.values_[i];
  return *this;
}

RealField& RealField::operator-=(const RealField& other) {
  require_same_grid(grid_, other.grid_, "RealField -=");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= other.values_[i];
  return *this;
}

RealField& RealField::operator*=(double s) noexcept {
  for (double& v : values_) v *= s;
  return *this;
}

RealField& RealField::axpy(double s, const RealField& other) {
  require_same_grid(grid_, other.grid_, "RealField axpy");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += s * other.values_[i];
  return *this;
}

SpectralField::SpectralField(GridPtr grid) : grid_(std::move(grid)) {
  if (!grid_) throw ContractViolation("SpectralField: null grid");
  coeffs_.assign(grid_->spectral_size(), {0.0, 0.0});
}

SpectralField::SpectralField(GridPtr grid, std::vector<std::complex<double>> coeffs)
    : grid_(std::move(grid)), coeffs_(std::move(coeffs)) {
  if (!grid_) throw ContractViolation("SpectralField: null grid");
  if (coeffs_.size() != grid_->spectral_size()) {
    throw ContractViolation("SpectralField: coefficient count does not match grid layout");
  }
}

SpectralField& SpectralField::operator+=(const SpectralField& other) {
  require_same_grid(grid_, other.grid_, "SpectralField +=");
  for (std::size_t i = 0; i < coeffs_.size(); ++i) coeffs_[i] += other.coeffs_[i];
  return *this;
}

SpectralField& SpectralField::operator-=(const SpectralField& other) {
  require_same_grid(grid_, other.grid_, "SpectralField -=");
  for (std::size_t i = 0; i < coeffs_.size(); ++i) coeffs_[i] -= other.coeffs_[i];
  return *this;
}

SpectralField& SpectralField::operator*=(double s) noexcept {
  for (auto& c : coeffs_) c *= s;
  return *this;
}

SpectralField& SpectralField::axpy(double s, const SpectralField& other) {
  require_same_grid(grid_, other.grid_, "SpectralField axpy");
  for (std::size_t i = 0; i < coeffs_.size(); ++i) coeffs_[i] += s * other.coeffs_[i];
  return *this;
}

// ---------------------------------------------------------------------------
// Symbols

FourierSymbol FourierSymbol::identity() {
  return {"identity", [](double) { return 1.0; }};
}

FourierSymbol FourierSymbol::laplacian() {
  return {"laplacian", [](double k2) { return -k2; }};
}

FourierSymbol FourierSymbol::swift_hohenberg() {
  return {"(1+laplacian)^2", [](double k2) { return (1.0 - k2) * (1.0 - k2); }};
}

FourierSymbol FourierSymbol::constant(double c) {
  return {"constant", [c](double) { return c; }};
}

// ---------------------------------------------------------------------------
// Transforms and operators

SpectralField to_spectral(const RealField& f) {
  SpectralField out(f.grid());
  f.grid()->forward(f.values(), out.coeffs());
  return out;
}

RealField to_physical(const SpectralField& f) {
  RealField out(f.grid());
  f.grid()->inverse(f.coeffs(), out.values());
  return out;
}

SpectralField apply_symbol(const SpectralField& f, const FourierSymbol& s) {
  SpectralField out = f;
  const auto kappa = f.grid()->wavenumber_sq();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= s(kappa[i]);
  return out;
}

RealField apply_symbol(const RealField& f, const FourierSymbol& s) {
  return to_physical(apply_symbol(to_spectral(f), s));
}

RealField laplacian(const RealField& f) { return apply_symbol(f, FourierSymbol::laplacian()); }

double mean_tolerance(const RealField& f) noexcept { return 1e-10 * std::max(1.0, f.max_abs()); }

namespace {

void require_mean_zero(const RealField& f) {
  const double m = mean(f);
  const double tol = mean_tolerance(f);
  if (std::abs(m) > tol) throw MeanViolation(m, tol);
}

}  // namespace

RealField inv_laplacian(const RealField& f) {
  require_mean_zero(f);
  SpectralField c = to_spectral(f);
  const auto kappa = f.grid()->wavenumber_sq();
  c[0] = 0.0;
  for (std::size_t i = 1; i < c.size(); ++i) c[i] /= -kappa[i];
  RealField out = to_physical(c);
  // zero mode is exactly zero in coefficient space; remove the round-off the
  // inverse transform reintroduces so that mean(out) == 0 to the last bit
  const double m = mean(out);
  for (double& v : out.values()) v -= m;
  return out;
}

double mean(const RealField& f) {
  // pairwise-free plain sum; accuracy is ample for grids up to 1024^2
  const double s = std::accumulate(f.values().begin(), f.values().end(), 0.0);
  return s / static_cast<double>(f.size());
}

double l2_inner(const RealField& f, const RealField& g) {
  require_same_grid(f.grid(), g.grid(), "l2_inner");
  double s = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) s += f[i] * g[i];
  return s * f.grid()->cell_volume();
}

double l2_norm(const RealField& f) { return std::sqrt(l2_inner(f, f)); }

double l2_inner(const SpectralField& f, const SpectralField& g) {
  require_same_grid(f.grid(), g.grid(), "l2_inner");
  const auto w = f.grid()->hermitian_weight();
  double s = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    s += w[i] * (f[i].real() * g[i].real() + f[i].imag() * g[i].imag());
  }
  return s * f.grid()->cell_volume() / static_cast<double>(f.grid()->size());
}

double l2_norm(const SpectralField& f) { return std::sqrt(l2_inner(f, f)); }

double hm1_norm_sq(const SpectralField& f) {
  const Grid& grid = *f.grid();
  const double n = static_cast<double>(grid.size());
  const double m = f[0].real() / n;
  // spectral coefficients carry no sup norm; bound it by the L1 mass of the spectrum
  double bound = 0.0;
  const auto w = grid.hermitian_weight();
  for (std::size_t i = 0; i < f.size(); ++i) bound += w[i] * std::abs(f[i]);
  const double tol = 1e-10 * std::max(1.0, bound / n);
  if (std::abs(m) > tol) throw MeanViolation(m, tol);

  const auto kappa = grid.wavenumber_sq();
  double s = 0.0;
  for (std::size_t i = 1; i < f.size(); ++i) s += w[i] * std::norm(f[i]) / kappa[i];
  return s * grid.cell_volume() / n;
}

double hm1_inner(const RealField& f, const RealField& g) {
  require_same_grid(f.grid(), g.grid(), "hm1_inner");
  require_mean_zero(f);
  require_mean_zero(g);
  const SpectralField fc = to_spectral(f);
  const SpectralField gc = to_spectral(g);
  const auto kappa = f.grid()->wavenumber_sq();
  const auto w = f.grid()->hermitian_weight();
  double s = 0.0;
  for (std::size_t i = 1; i < fc.size(); ++i) {
    s += w[i] * (fc[i].real() * gc[i].real() + fc[i].imag() * gc[i].imag()) / kappa[i];
  }
  return s * f.grid()->cell_volume() / static_cast<double>(f.grid()->size());
}

double hm1_norm(const RealField& f) {
  require_mean_zero(f);
  return std::sqrt(hm1_norm_sq(to_spectral(f)));
}

void check_positive(const Grid& grid, const FourierSymbol& s, ZeroMode zero_mode) {
  const auto kappa = grid.wavenumber_sq();
  const std::size_t first = zero_mode == ZeroMode::kSkip ? 1 : 0;
  for (std::size_t i = first; i < kappa.size(); ++i) {
    const double v = s(kappa[i]);
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw SingularOperator(s.name, static_cast<std::int64_t>(i), v);
    }
  }
}

SpectralField solve_symbol(const SpectralField& rhs, const FourierSymbol& s, ZeroMode zero_mode) {
  const auto kappa = rhs.grid()->wavenumber_sq();
  SpectralField out(rhs.grid());
  std::size_t first = 0;
  if (zero_mode == ZeroMode::kSkip) {
    out[0] = 0.0;
    first = 1;
  }
  for (std::size_t i = first; i < out.size(); ++i) {
    const double v = s(kappa[i]);
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw SingularOperator(s.name, static_cast<std::int64_t>(i), v);
    }
    out[i] = rhs[i] / v;
  }
  return out;
}

RealField solve_symbol(const RealField& rhs, const FourierSymbol& s, ZeroMode zero_mode) {
  if (zero_mode == ZeroMode::kSkip) require_mean_zero(rhs);
  return to_physical(solve_symbol(to_spectral(rhs), s, zero_mode));
}

}  // namespace vmpfc
