#pragma once

#include <stdexcept>
#include <string>

namespace tunnelcat {

/// Base of every error raised by the library. The CLI maps these to exit status 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Quadrature and root finding.
class ToleranceNotReached : public Error {
 public:
  ToleranceNotReached(const std::string& what, double estimate, double error)
      : Error(what), estimate_(estimate), error_(error) {}
  double estimate() const noexcept { return estimate_; }
  double error() const noexcept { return error_; }

 private:
  double estimate_;
  double error_;
};

class NonIntegrable : public Error {
 public:
  using Error::Error;
};

class NoSignChange : public Error {
 public:
  using Error::Error;
};

class EvaluationFailed : public Error {
 public:
  using Error::Error;
};

// Potentials.
class DegenerateCriticalPoint : public Error {
 public:
  DegenerateCriticalPoint(const std::string& what, double x) : Error(what), x_(x) {}
  double position() const noexcept { return x_; }

 private:
  double x_;
};

// Classical paths.
class InvalidBracket : public Error {
 public:
  using Error::Error;
};

class SingularTurningPoint : public Error {
 public:
  using Error::Error;
};

class Unavailable : public Error {
 public:
  using Error::Error;
};

class ConvergenceFailure : public Error {
 public:
  using Error::Error;
};

// Partition function.
class CutoffTooSmall : public Error {
 public:
  using Error::Error;
};

// Oracle.
class GridTooNarrow : public Error {
 public:
  using Error::Error;
};

class TailNotNegligible : public Error {
 public:
  using Error::Error;
};

}  // namespace tunnelcat
