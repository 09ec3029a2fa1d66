#pragma once

#include <stdexcept>
#include <string>

namespace bandfill {

/// Root of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Caller-side contract violations. The CLI maps these to exit code 2.
class UsageError : public Error {
 public:
  using Error::Error;
};

class DomainError : public UsageError {
 public:
  using UsageError::UsageError;
};

class PreconditionError : public UsageError {
 public:
  using UsageError::UsageError;
};

class ConfigError : public UsageError {
 public:
  using UsageError::UsageError;
};

class IoError : public UsageError {
 public:
  using UsageError::UsageError;
};

/// Numerical failures (exit code 3).
class NumericalError : public Error {
 public:
  using Error::Error;
};

class ConvergenceError : public NumericalError {
 public:
  ConvergenceError(const std::string& what, double last_term)
      : NumericalError(what), last_term_(last_term) {}
  explicit ConvergenceError(const std::string& what)
      : ConvergenceError(what, 0.0) {}
  double last_term() const noexcept { return last_term_; }

 private:
  double last_term_;
};

class SingularityError : public NumericalError {
 public:
  SingularityError(const std::string& what, double condition)
      : NumericalError(what), condition_(condition) {}
  double condition() const noexcept { return condition_; }

 private:
  double condition_;
};

/// Raised when a fixed-step integration was too coarse.
class RefinementError : public NumericalError {
 public:
  RefinementError(const std::string& what, double suggested_step)
      : NumericalError(what), suggested_step_(suggested_step) {}
  double suggested_step() const noexcept { return suggested_step_; }

 private:
  double suggested_step_;
};

}  // namespace bandfill
