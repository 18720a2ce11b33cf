#pragma once

#include <stdexcept>
#include <string>

namespace amrf {

/// Base class for every error raised by the toolkit. `exit_code()` is what the
/// CLI returns when the error escapes a subcommand.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual int exit_code() const noexcept { return 2; }
};

class InvalidDimension : public Error {
 public:
  using Error::Error;
};

class CapacityError : public Error {
 public:
  using Error::Error;
};

class UndefinedSnr : public Error {
 public:
  using Error::Error;
};

class InvalidBasis : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 3; }
};

}  // namespace amrf
