#pragma once

#include <stdexcept>
#include <string>

namespace uol {

/// Root of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition on the arguments was not met (dimension mismatch, bad matrix, ...).
class ContractViolation : public Error {
 public:
  using Error::Error;
};

/// A rescaled loss or optimism left [-1, 1].
class RangeViolation : public Error {
 public:
  using Error::Error;
};

/// An iterative routine failed to bracket or converge.
class NumericalFailure : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration (horizon, bounds, scenario name, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Calls made out of order (predict twice, update without predict).
class ProtocolError : public Error {
 public:
  using Error::Error;
};

/// A post-hoc self check failed: the library computed something it promised not to.
class ConsistencyError : public Error {
 public:
  using Error::Error;
};

/// Reading a config or writing outputs failed.
class IoError : public Error {
 public:
  using Error::Error;
};

namespace tol {
inline constexpr double kFeasibility = 1e-9;
inline constexpr double kOracle = 1e-6;
inline constexpr double kSimplex = 1e-12;
}  // namespace tol

}  // namespace uol
