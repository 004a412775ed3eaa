#pragma once

#include <stdexcept>
#include <string>

namespace mfwsn {

// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// A value is outside the domain an operation accepts (bad channel
// parameters, negative i, malformed initial condition, ...).
class ParameterError : public Error {
 public:
  explicit ParameterError(const std::string& msg) : Error(msg) {}
};

// A model violates a structural or semantic requirement (unknown state,
// receive transition with a numeric rate, unpaired capture/failure, ...).
class ModelError : public Error {
 public:
  explicit ModelError(const std::string& msg) : Error(msg) {}
};

// A numerical procedure failed to reach its tolerance (quadrature
// non-convergence, step-size underflow, Newton stagnation, ...).
class NumericError : public Error {
 public:
  explicit NumericError(const std::string& msg, double achieved = 0.0)
      : Error(msg), achieved_error(achieved) {}
  double achieved_error;
};

}  // namespace mfwsn
