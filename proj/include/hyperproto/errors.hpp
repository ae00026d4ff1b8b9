#pragma once

#include <stdexcept>
#include <string>

namespace hyperproto {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand lengths disagree or a dimension is out of range.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// An argument lies outside the domain of the operation (point outside the
/// ball, wrong curvature sign, mixed curvatures, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Vector is not tangent to the hyperboloid at its base point.
class TangencyError : public DomainError {
 public:
  using DomainError::DomainError;
};

/// Input whose direction is undefined (zero vector, antipodal centroid).
class DegenerateInputError : public DomainError {
 public:
  using DomainError::DomainError;
};

/// Floating point trouble: arguments of acosh/atanh/acos past tolerance,
/// quadrature that does not converge, nonfinite activations.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Distance gradient evaluated at coincident points.
class SingularGradientError : public NumericError {
 public:
  using NumericError::NumericError;
};

/// Training produced a nonfinite loss.
class TrainingError : public NumericError {
 public:
  TrainingError(const std::string& what, long episode)
      : NumericError(what + " (episode " + std::to_string(episode) + ")"), episode_(episode) {}

  long episode() const noexcept { return episode_; }

 private:
  long episode_;
};

/// Invalid or inconsistent configuration. `field()` names the offending key.
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& what)
      : Error(field.empty() ? what : field + ": " + what), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// File could not be read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace hyperproto
