#pragma once

#include <stdexcept>
#include <string>

namespace sewa {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid user-supplied configuration or parameters. Maps to CLI exit code 1.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

// Non-finite values, divergence, overflow.
class NumericError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Checkpoint-file format problems; each cause has its own type.
class FormatError : public Error {
 public:
  using Error::Error;
};

class MagicMismatchError : public FormatError {
 public:
  using FormatError::FormatError;
};

class VersionMismatchError : public FormatError {
 public:
  using FormatError::FormatError;
};

class TruncatedFileError : public FormatError {
 public:
  using FormatError::FormatError;
};

// Payload dimension disagrees with the window manifest.
class ManifestMismatchError : public FormatError {
 public:
  using FormatError::FormatError;
};

}  // namespace sewa
