#pragma once

#include <stdexcept>
#include <string>

namespace agriclip {

// Root of every error the library throws. Subclasses map onto the failure
// categories the CLI reports (usage/validation vs. runtime).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shape/dimension mismatch or out-of-range argument to a numeric routine.
class ParameterError : public Error {
 public:
  using Error::Error;
};

// Input that has no well-defined result (zero-norm vector, empty set).
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

// Invalid user-facing configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// A documented precondition of an operation does not hold.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

// Singular or ill-posed linear algebra.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// Non-finite value produced while evaluating a function.
class EvaluationError : public Error {
 public:
  using Error::Error;
};

// Loss diverged during training.
class TrainingError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Malformed binary or text artifact.
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace agriclip
