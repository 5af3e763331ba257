#pragma once

#include <stdexcept>
#include <string>

namespace emo {

// Every failure raised by the core derives from Error so the C boundary can
// map it onto a status code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

// Operation invoked in the wrong lifecycle state (backward before forward,
// stepping a finished episode, ...).
class StateError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class VersionError : public IoError {
 public:
  using IoError::IoError;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

}  // namespace emo
