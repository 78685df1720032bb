#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace echoroom {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad input: malformed files, out-of-range parameters, violated
/// preconditions. The CLI maps these to exit code 2.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Scene geometry that cannot be simulated (points on or outside walls,
/// coincident source and microphone, ...).
class InvalidGeometry : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// Output buffer too short for the requested content.
class TruncationError : public ValidationError {
 public:
  TruncationError(const std::string& what, std::size_t required)
      : ValidationError(what), required_length_(required) {}
  std::size_t required_length() const noexcept { return required_length_; }

 private:
  std::size_t required_length_;
};

/// A numerical procedure failed (singular system, failed alignment, ...).
/// The CLI maps these to exit code 3.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace echoroom
