#pragma once

#include <stdexcept>
#include <string>

namespace gpbounds {

class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Covariance factorization failed even at the largest permitted jitter.
class NumericalError : public std::runtime_error {
 public:
  NumericalError(const std::string& what, double jitter_reached)
      : std::runtime_error(what), jitter_reached_(jitter_reached) {}
  double jitter_reached() const noexcept { return jitter_reached_; }

 private:
  double jitter_reached_;
};

class FittingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UnsupportedDesign : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class EvaluationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Refusal to run a baseline whose evaluation count exceeds the guard.
class BudgetGuardError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace gpbounds
