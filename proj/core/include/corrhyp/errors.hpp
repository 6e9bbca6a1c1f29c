#pragma once

#include <stdexcept>
#include <string>

namespace corrhyp {

// Bad user input: malformed config files, invalid keys, inconsistent grids.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Numeric failures share a base so callers can map them to one exit code.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Grid too coarse for the corrugation frequency a step would introduce.
struct ResolutionError : NumericError {
    using NumericError::NumericError;
};

// Required positivity eta_i > 0 lost at some node.
struct ConeViolationError : NumericError {
    using NumericError::NumericError;
};

// A tangent map degenerated; the layer is no longer an immersion.
struct ImmersionLossError : NumericError {
    using NumericError::NumericError;
};

// Doubling search for a corrugation number ran past its cap.
struct BudgetExceededError : NumericError {
    BudgetExceededError(const std::string& msg, std::string condition)
        : NumericError(msg), failed_condition(std::move(condition)) {}
    std::string failed_condition;
};

// Artifact on disk does not match its recorded checksum.
struct ChecksumError : NumericError {
    using NumericError::NumericError;
};

// An identity the code maintains by construction failed beyond tolerance;
// indicates a bug or catastrophic cancellation, not bad input.
struct InternalConsistencyError : NumericError {
    using NumericError::NumericError;
};

}  // namespace corrhyp
