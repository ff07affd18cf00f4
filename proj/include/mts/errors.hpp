#pragma once

#include <stdexcept>
#include <string>

namespace mts {

// Base for all errors raised by this library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& message) : std::runtime_error(message) {}
};

// An invariant or precondition does not hold.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// File or directory level failure (missing, malformed, unwritable).
class IoError : public Error {
 public:
  using Error::Error;
};

// Bad run configuration (flags, config file, backend selection).
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace mts
