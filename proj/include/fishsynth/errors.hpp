#pragma once

#include <stdexcept>
#include <string>

namespace fishsynth {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An argument lies outside the mathematical domain of a radius law or its inverse.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A ray is steeper than the lens' maximum incidence angle, or a pixel lies
/// outside the image circle.
class OutOfFovError : public DomainError {
 public:
  using DomainError::DomainError;
};

/// Iterative distortion removal did not reach tolerance.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

/// Inconsistent or invalid configuration (intrinsics, view, dataset config).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Filesystem or codec failure. The message carries the offending path.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace fishsynth
