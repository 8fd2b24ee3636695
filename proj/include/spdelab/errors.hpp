#pragma once

#include <stdexcept>
#include <string>

namespace spdelab {

/// Precondition violated by a caller (negative time, index out of range, ...).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Malformed or inconsistent experiment/model configuration.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A structural assumption on the model does not hold. `assumption()` names it
/// ("A1", "A2", "A3", "A4", "alpha", ...).
class AssumptionError : public std::runtime_error {
public:
    AssumptionError(std::string assumption, const std::string& what)
        : std::runtime_error(assumption + ": " + what), assumption_(std::move(assumption)) {}

    const std::string& assumption() const noexcept { return assumption_; }

private:
    std::string assumption_;
};

/// Non-finite state, blow-up, or a numerical procedure that failed to converge.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace spdelab
