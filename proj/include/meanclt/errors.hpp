#pragma once

#include <stdexcept>
#include <string>

namespace meanclt {

/// Base class for all library errors. `exit_code()` is the CLI status the
/// error maps to: 2 for validation failures, 3 for resource/accuracy ones.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
  virtual int exit_code() const noexcept { return 2; }
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Malformed input: configs, CSV files, inconsistent specifications.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Operation called on a process variant it does not support.
class TypeError : public Error {
 public:
  using Error::Error;
};

/// A documented precondition of the operation does not hold.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// Long-run variance is zero or negative.
class DegenerateVarianceError : public Error {
 public:
  using Error::Error;
};

/// A series that must converge does not (e.g. rotation resonance).
class DivergenceError : public Error {
 public:
  using Error::Error;
};

/// Request exceeds the supported problem size.
class ResourceError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 3; }
};

/// Double precision is insufficient for the requested quantity.
class PrecisionError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 3; }
};

/// Adaptive quadrature hit its recursion cap. Carries the best estimate.
class AccuracyError : public Error {
 public:
  AccuracyError(const std::string& what, double estimate, double error_bound)
      : Error(what), estimate_(estimate), error_bound_(error_bound) {}
  int exit_code() const noexcept override { return 3; }
  double estimate() const noexcept { return estimate_; }
  double error_bound() const noexcept { return error_bound_; }

 private:
  double estimate_;
  double error_bound_;
};

}  // namespace meanclt
