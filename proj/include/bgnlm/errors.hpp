#pragma once

#include <stdexcept>
#include <string>

namespace bgnlm {

// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Invalid configuration or arguments (CLI exit code 2).
struct ConfigError : Error {
  using Error::Error;
};

// Malformed or unusable input data (CLI exit code 3).
struct DataError : Error {
  using Error::Error;
};

// Numerical failure: singular designs, non-finite values, divergence (CLI exit code 4).
struct NumericError : Error {
  using Error::Error;
};

}  // namespace bgnlm
