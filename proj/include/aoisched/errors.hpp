#pragma once

#include <stdexcept>
#include <string>

namespace aoisched {

/// Malformed or out-of-range configuration input.
class InvalidConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Requested state space exceeds the configured cap.
class CapacityError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Iterative computation did not reach its tolerance; carries the last residual.
class ConvergenceError : public std::runtime_error {
public:
    ConvergenceError(const std::string& what, double residual)
        : std::runtime_error(what), residual_(residual) {}
    double residual() const { return residual_; }

private:
    double residual_ = 0.0;
};

/// Violated operation precondition or malformed request (bad index, empty window, ...).
class InvalidRequestError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// File read/write failure.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace aoisched
