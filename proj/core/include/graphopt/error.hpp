#pragma once

#include <stdexcept>
#include <string>

namespace graphopt {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed argument: out-of-range value, NaN, wrong length.
class InputError : public Error {
 public:
  using Error::Error;
};

/// Inconsistent shapes between related objects (e.g. alphas vs. transitions).
class StructuralError : public InputError {
 public:
  using InputError::InputError;
};

/// Invalid declarative configuration (family masks, run configs, files).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Numerical breakdown: non-PSD correlation, degenerate training target.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// A point or problem that has no feasible realisation.
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

}  // namespace graphopt
