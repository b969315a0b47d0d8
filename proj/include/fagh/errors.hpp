#pragma once

#include <stdexcept>
#include <string>

namespace fagh {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Vector or matrix shapes that do not line up.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values, singular systems, division by zero.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// A precondition on an argument value (empty list, out-of-range parameter).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Malformed input files (IDX, CSV).
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Filesystem failures; the message carries the offending path.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Bad experiment configuration: unknown key, missing key, range violation.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace fagh
