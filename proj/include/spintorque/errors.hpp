#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace spintorque {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration or parameter bundle (CLI exit code 2).
class ConfigError : public Error {
 public:
  using Error::Error;
};

enum class ViolationKind { NonPositive, Negative, NonFinite, UnderdampedViolation, StepTooLarge, OutOfRange };

inline const char* to_string(ViolationKind k) {
  switch (k) {
    case ViolationKind::NonPositive: return "NonPositive";
    case ViolationKind::Negative: return "Negative";
    case ViolationKind::NonFinite: return "NonFinite";
    case ViolationKind::UnderdampedViolation: return "UnderdampedViolation";
    case ViolationKind::StepTooLarge: return "StepTooLarge";
    case ViolationKind::OutOfRange: return "OutOfRange";
  }
  return "?";
}

struct Violation {
  ViolationKind kind;
  std::string field;
};

/// Thrown by validate() with the full list of problems found.
class ValidationError : public ConfigError {
 public:
  explicit ValidationError(std::vector<Violation> v) : ConfigError(describe(v)), violations_(std::move(v)) {}

  const std::vector<Violation>& violations() const noexcept { return violations_; }

  bool has(ViolationKind k, const std::string& field = {}) const {
    for (const auto& v : violations_)
      if (v.kind == k && (field.empty() || v.field == field)) return true;
    return false;
  }

 private:
  static std::string describe(const std::vector<Violation>& v) {
    std::string s = "invalid parameters:";
    for (const auto& e : v) s += " " + std::string(to_string(e.kind)) + "(" + e.field + ")";
    return s;
  }
  std::vector<Violation> violations_;
};

/// Numerical failure during integration, fitting or root finding (CLI exit code 3).
class NumericalError : public Error {
 public:
  using Error::Error;
};

class NonFiniteError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class InvariantViolated : public NumericalError {
 public:
  InvariantViolated(long long step, std::string which)
      : NumericalError("invariant violated at step " + std::to_string(step) + ": " + which),
        step_(step),
        which_(std::move(which)) {}
  long long step() const noexcept { return step_; }
  const std::string& which() const noexcept { return which_; }

 private:
  long long step_;
  std::string which_;
};

/// Analysis-level failures (fits, estimators). Each has its own type so callers can branch.
class TooShort : public NumericalError { public: using NumericalError::NumericalError; };
class NoPeak : public NumericalError { public: using NumericalError::NumericalError; };
class NoConvergence : public NumericalError {
 public:
  NoConvergence(int iterations, double residual)
      : NumericalError("no convergence after " + std::to_string(iterations) +
                       " iterations (residual " + std::to_string(residual) + ")"),
        iterations_(iterations),
        residual_(residual) {}
  int iterations() const noexcept { return iterations_; }
  double residual() const noexcept { return residual_; }

 private:
  int iterations_;
  double residual_;
};
class DegenerateModes : public NumericalError { public: using NumericalError::NumericalError; };
class NonPositiveDamping : public NumericalError { public: using NumericalError::NumericalError; };
class NonStationary : public NumericalError { public: using NumericalError::NumericalError; };
class TooFewSamples : public NumericalError { public: using NumericalError::NumericalError; };
class NonLinearResponse : public NumericalError { public: using NumericalError::NumericalError; };
class NoSteadyState : public NumericalError { public: using NumericalError::NumericalError; };
class NoFixedPoint : public NumericalError { public: using NumericalError::NumericalError; };
class NoDoubleWell : public NumericalError { public: using NumericalError::NumericalError; };
class NoSignChange : public NumericalError { public: using NumericalError::NumericalError; };

}  // namespace spintorque
