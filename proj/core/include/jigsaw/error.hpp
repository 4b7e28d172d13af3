#pragma once

#include <stdexcept>
#include <string>

namespace jigsaw {

/// A value violates a documented invariant (bad permutation, invalid action,
/// out-of-range hyper-parameter, mismatched dimensions).
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// An experiment configuration is malformed or inconsistent.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A numerical routine produced or received a non-finite value.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Base class for on-disk data problems (instances, images, checkpoints).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ChecksumError : public DataError {
 public:
  using DataError::DataError;
};

class MissingFragmentError : public DataError {
 public:
  using DataError::DataError;
};

class ManifestError : public DataError {
 public:
  using DataError::DataError;
};

}  // namespace jigsaw
