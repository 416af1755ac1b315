#pragma once

#include <stdexcept>
#include <string>

namespace heatdual {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Precondition or input-validation failure (bad grid, NaN input, bad config).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class ConfigError : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

/// Base of every failure that comes from the numerics rather than the input.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class DomainError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class StencilError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class TruncationError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class StrictnessError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class CoverageError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class EvennessError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class BudgetError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace heatdual
