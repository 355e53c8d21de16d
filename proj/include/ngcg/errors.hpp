#pragma once

#include <stdexcept>
#include <string>

namespace ngcg {

// Shape disagreement between operands.
struct DimensionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Non-finite values, degenerate norms, numeric blow-ups.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Violated precondition or API contract (bad token id, bad rank, non-scalar loss, ...).
struct ContractError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Invalid configuration (unknown keys, out-of-range settings).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad or inconsistent data (duplicate ids, missing ground truth, short corpus).
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace ngcg
