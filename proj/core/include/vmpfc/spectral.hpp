#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace vmpfc {

class Grid;
using GridPtr = std::shared_ptr<const Grid>;

/// Periodic tensor-product grid on [0, L_0) x ... x [0, L_{d-1}).
///
/// Real fields are stored row-major (last axis fastest). Spectral fields use
/// the real-to-complex half layout: n_0 x ... x n_{d-2} x (n_{d-1}/2 + 1)
/// coefficients, again row-major. The forward transform is unnormalized, so
/// the zero-mode coefficient equals the sum of the grid values; the inverse
/// transform divides by the point count.
///
/// Wavenumbers follow k_j = 2 pi m_j / L_j with m_j in {-N_j/2, ..., N_j/2 - 1}
/// (the Nyquist mode enters with |m_j| = N_j/2). A Grid owns its FFTW plans and
/// may be shared freely between threads.
class Grid {
 public:
  static GridPtr make(std::vector<int> n_per_axis, std::vector<double> length_per_axis);
  /// Same number of points and edge length on every axis.
  static GridPtr make_uniform(int dim, int n, double length);

  ~Grid();
  Grid(const Grid&) = delete;
  Grid& operator=(const Grid&) = delete;

  int dim() const noexcept { return static_cast<int>(n_.size()); }
  const std::vector<int>& n() const noexcept { return n_; }
  const std::vector<double>& length() const noexcept { return length_; }

  std::size_t size() const noexcept { return real_size_; }
  std::size_t spectral_size() const noexcept { return spectral_size_; }
  double cell_volume() const noexcept { return cell_volume_; }
  double volume() const noexcept { return volume_; }
  double spacing(int axis) const { return length_.at(axis) / n_.at(axis); }

  /// |k|^2 for every coefficient of the half layout.
  std::span<const double> wavenumber_sq() const noexcept { return kappa_; }
  /// 1 for coefficients without a Hermitian partner in the half layout, 2 otherwise.
  std::span<const double> hermitian_weight() const noexcept { return weight_; }
  /// Signed integer mode indices (m_0, ..., m_{d-1}) of a half-layout coefficient.
  std::vector<int> mode_of(std::size_t spectral_index) const;

  /// Physical coordinates of the grid point with flat index `flat`.
  void coordinates(std::size_t flat, std::span<double> out) const;

  void forward(std::span<const double> in, std::span<std::complex<double>> out) const;
  /// Normalized inverse; `in` is copied because c2r transforms clobber their input.
  void inverse(std::span<const std::complex<double>> in, std::span<double> out) const;

  bool same_as(const Grid& other) const noexcept;

 private:
  Grid(std::vector<int> n, std::vector<double> length);

  std::vector<int> n_;
  std::vector<double> length_;
  std::size_t real_size_ = 0;
  std::size_t spectral_size_ = 0;
  double cell_volume_ = 0.0;
  double volume_ = 0.0;
  std::vector<double> kappa_;
  std::vector<double> weight_;
  void* forward_plan_ = nullptr;
  void* inverse_plan_ = nullptr;
};

/// Grid-sampled real field. Values are not checked for finiteness on
/// construction; schemes call all_finite() on their results.
class RealField {
 public:
  explicit RealField(GridPtr grid);
  RealField(GridPtr grid, std::vector<double> values);
  RealField(GridPtr grid, double constant);

  /// Samples fn(x) at every grid point; x has grid->dim() coordinates.
  static RealField sample(GridPtr grid, const std::function<double(std::span<const double>)>& fn);

  const GridPtr& grid() const noexcept { return grid_; }
  std::size_t size() const noexcept { return values_.size(); }
  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }
  double& operator[](std::size_t i) noexcept { return values_[i]; }
  double operator[](std::size_t i) const noexcept { return values_[i]; }

  bool all_finite() const noexcept;
  double max_abs() const noexcept;

  RealField& operator+=(const RealField& other);
  RealField& operator-=(const RealField& other);
  RealField& operator*=(double s) noexcept;
  /// this += s * other
  RealField& axpy(double s, const RealField& other);

  friend RealField operator+(RealField a, const RealField& b) { return a += b; }
  friend RealField operator-(RealField a, const RealField& b) { return a -= b; }
  friend RealField operator*(RealField a, double s) { return a *= s; }
  friend RealField operator*(double s, RealField a) { return a *= s; }

 private:
  GridPtr grid_;
  std::vector<double> values_;
};

/// Half-layout Fourier coefficients of a real field.
class SpectralField {
 public:
  explicit SpectralField(GridPtr grid);
  SpectralField(GridPtr grid, std::vector<std::complex<double>> coeffs);

  const GridPtr& grid() const noexcept { return grid_; }
  std::size_t size() const noexcept { return coeffs_.size(); }
  std::span<std::complex<double>> coeffs() noexcept { return coeffs_; }
  std::span<const std::complex<double>> coeffs() const noexcept { return coeffs_; }
  std::complex<double>& operator[](std::size_t i) noexcept { return coeffs_[i]; }
  const std::complex<double>& operator[](std::size_t i) const noexcept { return coeffs_[i]; }

  SpectralField& operator+=(const SpectralField& other);
  SpectralField& operator-=(const SpectralField& other);
  SpectralField& operator*=(double s) noexcept;
  SpectralField& axpy(double s, const SpectralField& other);

  friend SpectralField operator+(SpectralField a, const SpectralField& b) { return a += b; }
  friend SpectralField operator-(SpectralField a, const SpectralField& b) { return a -= b; }
  friend SpectralField operator*(SpectralField a, double s) { return a *= s; }
  friend SpectralField operator*(double s, SpectralField a) { return a *= s; }

 private:
  GridPtr grid_;
  std::vector<std::complex<double>> coeffs_;
};

/// Diagonal operator in Fourier space, given as a function of |k|^2.
struct FourierSymbol {
  std::string name;
  std::function<double(double)> eval;

  double operator()(double kappa) const { return eval(kappa); }

  static FourierSymbol identity();
  /// -|k|^2
  static FourierSymbol laplacian();
  /// (1 - |k|^2)^2, the symbol of (Delta + 1)^2
  static FourierSymbol swift_hohenberg();
  static FourierSymbol constant(double c);
};

/// How solve_symbol treats the k = 0 coefficient.
enum class ZeroMode {
  kSolve,  ///< symbol must be positive at k = 0 too
  kSkip,   ///< rhs must be mean-zero; the result's zero mode is set to 0
};

SpectralField to_spectral(const RealField& f);
RealField to_physical(const SpectralField& f);

RealField apply_symbol(const RealField& f, const FourierSymbol& s);
SpectralField apply_symbol(const SpectralField& f, const FourierSymbol& s);

RealField laplacian(const RealField& f);
/// Delta^{-1} on mean-zero fields: zero mode set to 0, other modes divided by
/// -|k|^2. Throws MeanViolation if |mean(f)| exceeds mean_tolerance(f).
RealField inv_laplacian(const RealField& f);

/// Default tolerance for mean-zero preconditions: 1e-10 * max(1, ||f||_inf).
double mean_tolerance(const RealField& f) noexcept;

double mean(const RealField& f);
double l2_inner(const RealField& f, const RealField& g);
double l2_norm(const RealField& f);
/// L2 inner product evaluated from Fourier coefficients (Parseval).
double l2_inner(const SpectralField& f, const SpectralField& g);
double l2_norm(const SpectralField& f);

/// (f, g)_{-1} = (-Delta^{-1} f, g); both must be mean-zero.
double hm1_inner(const RealField& f, const RealField& g);
double hm1_norm(const RealField& f);
/// Squared H^-1 norm from coefficients; the zero mode is checked, then ignored.
double hm1_norm_sq(const SpectralField& f);

/// Returns u with s(|k|^2) u_k = rhs_k. Throws SingularOperator if the symbol
/// is not strictly positive on a mode that is solved for.
RealField solve_symbol(const RealField& rhs, const FourierSymbol& s, ZeroMode zero_mode = ZeroMode::kSolve);
SpectralField solve_symbol(const SpectralField& rhs, const FourierSymbol& s,
                           ZeroMode zero_mode = ZeroMode::kSolve);

/// Throws SingularOperator unless s > 0 on every mode of `grid`
/// (excluding k = 0 when zero_mode is kSkip).
void check_positive(const Grid& grid, const FourierSymbol& s, ZeroMode zero_mode = ZeroMode::kSolve);

}  // namespace vmpfc
