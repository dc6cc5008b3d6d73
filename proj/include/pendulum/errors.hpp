#pragma once

#include <stdexcept>
#include <string>

namespace pendulum {

/// Precondition violation: parameters outside the operation's domain
/// (e.g. gamma = 0 where the nullcline is undefined, beta >= 1 where a
/// saddle is required).
struct DomainError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// The adaptive step size underflowed (below max_step * 1e-12).
struct StiffnessFailure : std::runtime_error {
    StiffnessFailure(const std::string& what, double at)
        : std::runtime_error(what), at_x(at) {}
    double at_x;   ///< independent variable where the step collapsed
};

/// A shot ended without reaching any classifying event (span exhausted);
/// usually means max_span or the tolerances are too tight for the case.
struct ClassificationAmbiguous : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace pendulum
