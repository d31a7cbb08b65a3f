#pragma once

#include <stdexcept>
#include <string>

namespace csteer {

/// Base for every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input violates a documented invariant (non-finite data, bad shape, bad file contents).
class ValidationError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// Argument outside the mathematical domain of an operation (e.g. negative eigenvalue).
class DomainError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// Operation called in a state it does not support (double mean-centering, wrong payload).
class UsageError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// Conditioning too poor for a trustworthy result.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Boolean operand whose regularized inverse fails the idempotence check.
class SingularityError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace csteer
