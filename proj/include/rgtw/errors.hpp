#pragma once

#include <stdexcept>
#include <string>

namespace rgtw {

/// Malformed or inconsistent input data (bad prices, misaligned series, bad CSV).
class InputError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
public:
  using std::domain_error::domain_error;
};

/// Overflow, non-finite intermediate, or other floating point breakdown.
class NumericalError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

}  // namespace rgtw
