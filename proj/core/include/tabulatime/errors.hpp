#pragma once

#include <stdexcept>
#include <string>

namespace tabulatime {

// Shape disagreement between operands.
struct DimensionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad input data (CSV contents, missing values, invalid series).
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Violated API precondition (non-scalar loss, parameter out of range).
struct ContractError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Operation attempted in the wrong object state (e.g. transform before fit).
struct StateError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Corrupt or incompatible serialized artifact.
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Training diverged or could not proceed.
struct TrainingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Non-finite value detected while checked mode is on.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace tabulatime
