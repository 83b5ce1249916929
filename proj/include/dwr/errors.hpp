#pragma once

#include <stdexcept>
#include <string>

namespace dwr {

/// Raised for violated preconditions on public operations.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A solver (linear, Newton) failed to reach its tolerance.
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NonConvergence : public SolverError {
 public:
  using SolverError::SolverError;
};

/// Network training kept diverging after the configured number of restarts.
class RestartLimitExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {
inline void require(bool cond, const std::string& msg) {
  if (!cond) throw InvalidArgument(msg);
}
}  // namespace detail

}  // namespace dwr
