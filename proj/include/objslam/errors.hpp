#pragma once

#include <stdexcept>
#include <string>

namespace objslam {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

/// Input matrix is not in SO(3) within tolerance.
class InvalidRotation : public Error {
 public:
  using Error::Error;
};

/// Rotation angle too close to pi for a unique logarithm.
class LogDomainError : public Error {
 public:
  using Error::Error;
};

class MissingFeature : public Error {
 public:
  using Error::Error;
};

class DuplicateFeature : public Error {
 public:
  using Error::Error;
};

/// Innovation covariance condition number above the update limit.
class IllConditionedInnovation : public Error {
 public:
  using Error::Error;
};

class SingularCovariance : public Error {
 public:
  using Error::Error;
};

/// Malformed measurement log or Jacobian log input.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

}  // namespace objslam
