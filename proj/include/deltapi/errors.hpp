#pragma once

#include <stdexcept>
#include <string>

namespace deltapi {

/// Raised when a caller hands in inconsistent dimensions or out-of-range parameters.
class ContractViolation : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Raised when the integrator produces or encounters a non-finite state.
class IntegrationFailure : public std::runtime_error {
public:
    IntegrationFailure(const std::string& what, double t)
        : std::runtime_error(what + " (t = " + std::to_string(t) + ")"), time_(t) {}

    double time() const noexcept { return time_; }

private:
    double time_;
};

/// Not enough windows for the number of unknown weights.
class RankConditionViolation : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class SingularRegressor : public std::runtime_error {
public:
    SingularRegressor(const std::string& what, double condition)
        : std::runtime_error(what), condition_(condition) {}

    double condition_estimate() const noexcept { return condition_; }

private:
    double condition_;
};

/// Non-finite values in data handed to the learner.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class FingerprintMismatch : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace deltapi
