#pragma once

#include <stdexcept>
#include <string>

namespace lcvx
{

/// Malformed or out-of-range arguments (dimension mismatch, non-finite data, bad grid).
class InvalidInput : public std::invalid_argument
{
public:
    using std::invalid_argument::invalid_argument;
};

/// A problem instance violates one of the structural assumptions the relaxation relies on.
class AssumptionViolation : public std::invalid_argument
{
public:
    AssumptionViolation(std::string assumption, const std::string& detail)
        : std::invalid_argument(assumption + ": " + detail), assumption_(std::move(assumption))
    {
    }

    const std::string& assumption() const noexcept { return assumption_; }

private:
    std::string assumption_;
};

/// The conic backend broke down; carries the solver diagnostics in what().
class SolverFailure : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

}  // namespace lcvx
