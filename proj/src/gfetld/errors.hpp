#pragma once

#include <stdexcept>
#include <string>

namespace gfetld {

// Input data that cannot support the requested computation (too few rows,
// zero median distance, all grid weights at the likelihood floor, ...).
struct DegenerateDataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A matrix that must be invertible is not.
struct SingularMatrixError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A model was asked for something it does not support (e.g. a Jacobian).
struct CapabilityError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Non-finite values appeared during integration or sampling.
struct DivergenceError : std::runtime_error {
    explicit DivergenceError(const std::string& what, long step = -1)
        : std::runtime_error(what), step_index(step) {}
    long step_index;  // -1 when not tied to a sampler step
};

// Malformed or inconsistent configuration.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Filesystem failure while reading inputs or emitting outputs.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace gfetld
