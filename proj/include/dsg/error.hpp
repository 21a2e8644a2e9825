#pragma once

#include <stdexcept>
#include <string>

namespace dsg {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor shapes do not fit the requested operation.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A NaN or infinity was produced, or a quantity is mathematically undefined.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Argument violates an operation's precondition.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Malformed or inconsistent input file.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Invalid argument or configuration value.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace dsg
