#pragma once

#include <stdexcept>
#include <string>

namespace apm {

/// Raised when a numeric parameter lies outside its admissible range.
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a site set or placement is not contained in a domain.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Raised when an operation does not support the requested field model.
class UnsupportedModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when an exact enumeration or estimator would be infeasible or undefined.
class EstimationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace apm
