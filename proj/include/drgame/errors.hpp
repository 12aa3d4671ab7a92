#pragma once

#include <stdexcept>
#include <string>

namespace drgame {

/// Base class for all domain errors thrown by this library.
/// Catching this is enough to distinguish "your input broke a precondition"
/// from genuine bugs (which surface as std::logic_error).
struct DomainError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// --- pricing / demand preconditions ---------------------------------------

struct NonPositivePrice : DomainError {
    using DomainError::DomainError;
};

struct NegativeDemand : DomainError {
    using DomainError::DomainError;
};

struct ZeroAggregateBudget : DomainError {
    using DomainError::DomainError;
};

struct SingularMatrix : DomainError {
    using DomainError::DomainError;
};

// --- allocation-game preconditions ----------------------------------------

struct ZetaNotUniform : DomainError {
    using DomainError::DomainError;
};

struct DegenerateDenominator : DomainError {
    using DomainError::DomainError;
};

struct ScaleTooLarge : DomainError {
    using DomainError::DomainError;
};

// --- regime-analysis preconditions ----------------------------------------

struct AsymmetricScenario : DomainError {
    using DomainError::DomainError;
};

struct NonPositiveInput : DomainError {
    using DomainError::DomainError;
};

// --- ingestion ------------------------------------------------------------

/// Raised when a data or config file cannot be parsed; carries the 1-based
/// line number when one is known (0 otherwise).
struct ParseError : DomainError {
    ParseError(const std::string& msg, std::size_t line_no = 0)
        : DomainError(line_no ? msg + " (line " + std::to_string(line_no) + ")" : msg),
          line(line_no) {}
    std::size_t line;
};

struct UnitError : DomainError {
    using DomainError::DomainError;
};

struct ShareSumError : DomainError {
    using DomainError::DomainError;
};

struct CountMismatch : DomainError {
    using DomainError::DomainError;
};

}  // namespace drgame
