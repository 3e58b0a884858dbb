#pragma once

#include <stdexcept>
#include <string>

namespace lpqsm {

/// Contract violation on arguments (grid mismatch, invalid config values).
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed or inconsistent external data (files, schemas, containers).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Numerical failure at runtime (divergence, non-finite values).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace lpqsm
