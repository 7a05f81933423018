#pragma once

#include <stdexcept>

namespace vq {

// Error families map onto the CLI exit codes: InvalidArgument -> 1 (usage),
// DataError -> 2 (missing or malformed inputs), NumericError -> 3
// (degenerate inputs, diverged solvers).

struct InvalidArgument : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace vq
