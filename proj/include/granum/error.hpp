#pragma once

#include <stdexcept>
#include <string>

namespace granum {

/// Input data is malformed or violates a domain invariant (bad JSON, duplicate
/// identifiers, hierarchy cycles, missing documents).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A run configuration or command-line value is invalid.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace granum
