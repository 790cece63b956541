#pragma once

#include <stdexcept>
#include <string>

namespace runmax {

/// Invalid or inconsistent user configuration (exit code 3 in the CLI).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Caller broke a documented precondition (dimension mismatch, bad input).
class ContractViolation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// A required hypothesis of a check does not hold on the given model.
class PreconditionError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Path integration left the admissible region.
class IntegrationError : public std::runtime_error {
public:
    IntegrationError(const std::string& what, double time)
        : std::runtime_error(what + " at t=" + std::to_string(time)), time_(time) {}
    double time() const { return time_; }

private:
    double time_;
};

/// LP assembly failed, typically because the truncation box is too small.
class AssemblyError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Fixed-point iteration did not converge (exit code 4 in the CLI).
class NonConvergence : public std::runtime_error {
public:
    NonConvergence(const std::string& what, double last_residual)
        : std::runtime_error(what + " (last residual " + std::to_string(last_residual) + ")"),
          last_residual_(last_residual) {}
    double last_residual() const { return last_residual_; }

private:
    double last_residual_;
};

/// Scheme-level consistency failure, e.g. q-monotonicity broken beyond tolerance.
class ConsistencyError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace runmax
