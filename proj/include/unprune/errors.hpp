#pragma once

#include <stdexcept>
#include <string>

namespace unpruning {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor dimensions that do not agree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Arguments outside an operation's precondition.
class InputError : public Error {
 public:
  using Error::Error;
};

/// Malformed binary or text input. The message carries the byte offset.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Non-finite loss or weights during an iterative procedure.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Invalid or inconsistent experiment configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace unpruning
