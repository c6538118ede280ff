#pragma once

#include <stdexcept>
#include <string>

namespace nmqrc {

// Base of every exception thrown by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Malformed arguments: wrong dimensions, out-of-range indices, bad inputs.
class InvalidArgument : public Error {
public:
  using Error::Error;
};

// Register larger than the dense-storage guard allows.
class DimensionError : public Error {
public:
  using Error::Error;
};

// Loss of a numerical invariant during a computation (non-Hermitian state,
// solver non-convergence, NARMA divergence, complex expectation values).
class NumericalError : public Error {
public:
  using Error::Error;
};

// Invalid experiment configuration. `field` names the offending key.
class ConfigError : public Error {
public:
  ConfigError(std::string field, const std::string& what)
      : Error(field + ": " + what), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

private:
  std::string field_;
};

}  // namespace nmqrc
