#pragma once

#include <stdexcept>
#include <string>

namespace mcslab {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Invalid configuration (bad dimensions, unsatisfiable parameters).
struct ConfigError : Error {
  using Error::Error;
};

// Caller broke a precondition (dimension mismatch, framing, length).
struct ContractError : Error {
  using Error::Error;
};

// Numerical failure (singular system, degenerate posterior).
struct NumericError : Error {
  using Error::Error;
};

// Operation on an object in the wrong state (empty index, missing artifact).
struct StateError : Error {
  using Error::Error;
};

}  // namespace mcslab
