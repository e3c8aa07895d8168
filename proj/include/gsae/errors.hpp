// Error taxonomy shared by all modules. Parameter and value problems
// (ValidationError, ConfigError) map to CLI exit code 1, file and stream
// problems (IoError and descendants) to exit code 2.
#pragma once

#include <stdexcept>
#include <string>

namespace gsae {

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Input data violates a documented invariant (shape, range, finiteness).
class ValidationError : public Error {
 public:
  using Error::Error;
};

// A parameter combination is unusable (k > m, empty split, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Mathematically degenerate input (zero-norm row, zero-norm direction).
class DegenerateInputError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Stream exists but is not a well-formed container (bad magic, dtype, ...).
class FormatError : public IoError {
 public:
  using IoError::IoError;
};

// Stream ended before the payload the header promised.
class CorruptionError : public FormatError {
 public:
  using FormatError::FormatError;
};

class UnsupportedVersionError : public FormatError {
 public:
  using FormatError::FormatError;
};

}  // namespace gsae
