#pragma once

#include <stdexcept>
#include <string>

namespace riskstop {

/// Invalid arguments or parameters outside their documented domain.
struct InvalidParams : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// A kernel tail descriptor can neither sum the requested expectation in
/// closed form nor certify its divergence.
struct TailUndecidable : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Monte Carlo evaluation refused: the target expectation is certified
/// infinite, so any finite estimate would be meaningless.
struct DivergentTarget : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// The dyadic solver's truncation error bound exceeds the requested accuracy.
struct BudgetExceeded : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Operation only defined in a specific parameter regime.
struct WrongRegime : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Two runs passed to a comparison were produced from different models or
/// base points.
struct ModelMismatch : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Candidate value function violates 0 <= v <= G on the evaluation set.
struct BadCandidate : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Configuration file or CLI argument error.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace riskstop
