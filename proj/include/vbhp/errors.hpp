#pragma once

#include <stdexcept>
#include <string>

namespace vbhp {

// Argument outside a function's mathematical domain (e.g. digamma(0), z > 0 for G-tilde).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Caller passed structurally invalid input (dimension mismatch, unsorted events).
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Variational state violates an invariant (non-PSD covariance, non-positive variance).
class StateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A computation produced a value that signals broken numerics.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input data could not be ingested.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public DataError {
 public:
  using DataError::DataError;
};

class IncompatibleVersionError : public DataError {
 public:
  using DataError::DataError;
};

class ExplosionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SelectionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace vbhp
