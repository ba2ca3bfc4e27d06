#pragma once

#include <stdexcept>
#include <string>

namespace flora {

/// Base class for every error raised by the library. `exit_code()` is the
/// status the command-line front end returns when the error escapes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual int exit_code() const noexcept { return 1; }
};

/// Caller passed something the operation cannot accept (shape, range, id).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Inconsistent or incomplete configuration (e.g. sampling without a cache).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed file contents or an I/O failure.
class FormatError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 2; }
};

/// Non-finite values during training or scoring.
class NumericError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 3; }
};

}  // namespace flora

#define FLORA_REQUIRE(cond, ExcType, msg)      \
  do {                                         \
    if (!(cond)) throw ExcType(std::string(msg)); \
  } while (0)
