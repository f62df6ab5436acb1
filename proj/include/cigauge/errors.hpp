#pragma once

#include <stdexcept>
#include <string>

namespace cigauge {

// Bad parameter values (maps to the CLI usage exit code).
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Operand dimensions disagree, e.g. prior dim vs system size.
class DimensionMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Multiplexing matrix is singular or too ill-conditioned to invert.
class NotInvertible : public NumericalError {
 public:
  NotInvertible(const std::string& what, double condition)
      : NumericalError(what), condition_(condition) {}
  double condition() const noexcept { return condition_; }

 private:
  double condition_;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public IoError {
 public:
  enum class Kind { kBadMagic, kVersionMismatch, kTruncated, kMalformed };

  ParseError(Kind kind, const std::string& what) : IoError(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

}  // namespace cigauge
