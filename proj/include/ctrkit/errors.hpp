#pragma once

#include <stdexcept>
#include <string>

namespace ctrkit {

// Shape disagreement between operands or an out-of-range axis/slice.
struct DimensionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Math domain violation (log of a non-positive value, non-finite result).
struct DomainError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Invalid configuration value or inconsistent hyperparameters.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Missing column, unknown field, or schema/checkpoint mismatch.
struct SchemaError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Unreadable/unwritable file.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed input text or corrupt binary payload.
struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Non-finite loss during training.
struct DivergenceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Metric undefined for the given input (e.g. single-class AUC).
struct MetricError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace ctrkit
