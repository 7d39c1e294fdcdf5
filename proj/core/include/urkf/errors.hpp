#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace urkf {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input: bad dimensions, non-PD covariances, invalid configuration.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// A numerical routine could not produce a valid result.
///
/// Carries the time index when the failure happened inside a recursion so
/// callers can report where a horizon broke.
class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what, std::optional<std::size_t> step = std::nullopt)
      : Error(step ? what + " (t=" + std::to_string(*step) + ")" : what), step_(step), message_(what) {}

  [[nodiscard]] std::optional<std::size_t> step() const noexcept { return step_; }
  [[nodiscard]] const std::string& message() const noexcept { return message_; }

 private:
  std::optional<std::size_t> step_;
  std::string message_;
};

/// θ·σ_max(P) ≥ 1: the distortion (I − θP) is not positive definite.
class DomainError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// A Cholesky factorization hit a non-positive pivot.
class FactorizationError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// A risk or budget parameter is too large for the recursion it drives.
class InfeasibleError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// An iteration did not reach its fixed point within the cap.
class ConvergenceError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// File could not be read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Rethrows `e` with the time index attached, preserving the dynamic type.
[[noreturn]] void rethrow_at_step(const NumericalError& e, std::size_t step);

}  // namespace urkf
