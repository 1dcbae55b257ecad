#pragma once

#include <stdexcept>
#include <string>

namespace linecover {

// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or out-of-contract input data (bad CSV schema, points outside a
// window, unusable geometry). The CLI maps these to exit code 2.
class InputError : public Error {
 public:
  using Error::Error;
};

// Geometry preconditions: vertical line asked for a slope, coincident points,
// degenerate tracks.
class GeometryError : public InputError {
 public:
  using InputError::InputError;
};

// Numerical procedure failed to converge. The CLI maps these to exit code 3.
class NumericalError : public Error {
 public:
  NumericalError(const std::string& what, double residual)
      : Error(what), residual_(residual) {}

  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

}  // namespace linecover
