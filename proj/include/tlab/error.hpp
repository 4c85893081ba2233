#pragma once

#include <stdexcept>
#include <string>

namespace tlab {

// Base of every error raised by the library. The CLI maps the concrete
// subclasses onto process exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration or parameters (exit code 2).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed or inconsistent input data (exit code 3).
class DataError : public Error {
 public:
  using Error::Error;
};

// Non-finite loss or gradient during optimization (exit code 4).
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace tlab
