#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace vmpfc {

/// Base class of every error raised by the solver library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller broke an operation's precondition (size mismatch, bad argument).
class ContractViolation : public Error {
 public:
  using Error::Error;
};

/// A field that must be mean-zero (inverse Laplacian, H^-1 norm) is not.
class MeanViolation : public Error {
 public:
  MeanViolation(double measured_mean, double tolerance);
  double measured_mean() const noexcept { return mean_; }

 private:
  double mean_;
};

/// A Fourier symbol used as a denominator is not strictly positive.
class SingularOperator : public Error {
 public:
  SingularOperator(const std::string& symbol, std::int64_t mode_index, double value);
  std::int64_t mode_index() const noexcept { return mode_; }

 private:
  std::int64_t mode_;
};

/// An energy shift (b, c0) is too small to keep a square-root argument positive.
class ShiftTooSmall : public Error {
 public:
  using Error::Error;
};

/// exp(E/C) would overflow: the exponential scaling constant C is too small.
class ScalingError : public Error {
 public:
  using Error::Error;
};

/// The rank-one corrected linear system of the SAV step is not solvable.
class SolvabilityError : public Error {
 public:
  using Error::Error;
};

/// A time step produced non-finite values or broke a conserved quantity.
class NumericalFailure : public Error {
 public:
  using Error::Error;
};

/// Invalid or inconsistent configuration; carries the offending key path.
class ConfigError : public Error {
 public:
  ConfigError(std::string key, const std::string& message);
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

/// File-system or format failure while reading or writing outputs.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace vmpfc
