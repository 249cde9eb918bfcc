#pragma once

#include <stdexcept>
#include <string>

namespace cilf {

// Error hierarchy mirrored by the CLI exit codes:
//   ConfigError / UsageError / ShapeError -> 2
//   DataError (and checkpoint variants)   -> 3
//   NumericError                          -> 4
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Structural problems: mismatched matrix/layer shapes.
struct ShapeError : UsageError {
    using UsageError::UsageError;
};

struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Checkpoint file declares a version this build does not support.
struct CheckpointVersionError : DataError {
    using DataError::DataError;
};

struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace cilf
