#pragma once

#include <stdexcept>
#include <string>

namespace mlrwl {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed arguments or data that violates a documented precondition.
class InvalidInputError : public Error {
 public:
  using Error::Error;
};

class DimensionMismatchError : public InvalidInputError {
 public:
  using InvalidInputError::InvalidInputError;
};

class NonFiniteError : public InvalidInputError {
 public:
  using InvalidInputError::InvalidInputError;
};

class TreatmentCodingError : public InvalidInputError {
 public:
  using InvalidInputError::InvalidInputError;
};

class PositivityError : public InvalidInputError {
 public:
  using InvalidInputError::InvalidInputError;
};

class DegenerateDataError : public InvalidInputError {
 public:
  using InvalidInputError::InvalidInputError;
};

// Numerical breakdown while evaluating an otherwise valid input.
class NumericError : public Error {
 public:
  using Error::Error;
};

// An iterative fit stopped without meeting its convergence certificate.
class OptimizationError : public Error {
 public:
  using Error::Error;
};

class FitError : public Error {
 public:
  using Error::Error;
};

class TuningError : public Error {
 public:
  using Error::Error;
};

// Empirical value with an empty matched set.
class UndefinedValueError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace mlrwl
