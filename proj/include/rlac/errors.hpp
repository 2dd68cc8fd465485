#pragma once

#include <stdexcept>
#include <string>

namespace rlac {

// Violated precondition of an operation (caller bug).
struct ContractError : std::logic_error {
  using std::logic_error::logic_error;
};

struct DimensionError : ContractError {
  using ContractError::ContractError;
};

// Bad user configuration; `key` names the offending config path.
struct ConfigError : std::runtime_error {
  ConfigError(std::string key, const std::string& what)
      : std::runtime_error(key + ": " + what), key(std::move(key)) {}
  std::string key;
};

// NaN/inf in a loss or an iterative solver that did not converge.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace rlac
