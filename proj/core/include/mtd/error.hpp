#pragma once

#include <stdexcept>
#include <string>

namespace mtd {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not conform for a primitive.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Bad configuration value or malformed input file.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Filesystem failure; the message carries the offending path.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace mtd
