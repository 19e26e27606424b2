#pragma once

#include <stdexcept>
#include <string>

namespace stratwave {

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// A density profile violating positivity, monotonicity, or normalization.
class InvalidProfileError : public Error {
 public:
  using Error::Error;
};

// Horizontal stagnation: h_p <= 0, equivalently w_zeta <= -1.
class StagnationError : public Error {
 public:
  using Error::Error;
};

// An iteration (Newton, continuation, eigen bisection, ODE step) failed to converge.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

// Bad call arguments, out-of-range coordinates, malformed configuration.
class InvalidArgumentError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace stratwave
