#pragma once

#include <stdexcept>
#include <string>

namespace dirand {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Some input pair was never played; the estimation data must be resampled.
class ZeroInputCount : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class UnsupportedLevel : public Error {
 public:
  using Error::Error;
};

/// The behaviour handed to a guessing program lies outside the relaxation.
class Infeasible : public Error {
 public:
  using Error::Error;
};

/// The requested Bell value lies outside the relaxation's range.
class InfeasibleValue : public Error {
 public:
  using Error::Error;
};

/// The conic backend did not reach a trustworthy solution.
class SolverFailure : public Error {
 public:
  using Error::Error;
};

/// Bounds that a computation needs were never cached on the expression.
class MissingBounds : public Error {
 public:
  using Error::Error;
};

}  // namespace dirand
