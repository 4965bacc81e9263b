#pragma once

#include <stdexcept>
#include <string>

namespace qmem {

enum class ErrorCode {
    InvalidArgument,
    ConfigParse,
    PoleHit,
    UnwrapAmbiguity,
    QuadratureNotConverged,
    DegenerateDetunings,
    RootFindingStalled,
    BranchMatchingAmbiguous,
    NoTransitionInBracket,
    OutOfTable,
    DomainError,
    AsymmetricConfig,
    NotConverged,
    StepSizeUnderflow,
};

inline const char* to_string(ErrorCode code) noexcept {
    switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::ConfigParse: return "ConfigParse";
    case ErrorCode::PoleHit: return "PoleHit";
    case ErrorCode::UnwrapAmbiguity: return "UnwrapAmbiguity";
    case ErrorCode::QuadratureNotConverged: return "QuadratureNotConverged";
    case ErrorCode::DegenerateDetunings: return "DegenerateDetunings";
    case ErrorCode::RootFindingStalled: return "RootFindingStalled";
    case ErrorCode::BranchMatchingAmbiguous: return "BranchMatchingAmbiguous";
    case ErrorCode::NoTransitionInBracket: return "NoTransitionInBracket";
    case ErrorCode::OutOfTable: return "OutOfTable";
    case ErrorCode::DomainError: return "DomainError";
    case ErrorCode::AsymmetricConfig: return "AsymmetricConfig";
    case ErrorCode::NotConverged: return "NotConverged";
    case ErrorCode::StepSizeUnderflow: return "StepSizeUnderflow";
    }
    return "Unknown";
}

// Every failure raised by the library carries a machine-readable code.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

// True for failures of the numerical machinery as opposed to bad input.
inline bool is_numeric_failure(ErrorCode code) noexcept {
    switch (code) {
    case ErrorCode::PoleHit:
    case ErrorCode::UnwrapAmbiguity:
    case ErrorCode::QuadratureNotConverged:
    case ErrorCode::RootFindingStalled:
    case ErrorCode::BranchMatchingAmbiguous:
    case ErrorCode::NoTransitionInBracket:
    case ErrorCode::NotConverged:
    case ErrorCode::StepSizeUnderflow:
    case ErrorCode::DegenerateDetunings:
        return true;
    default:
        return false;
    }
}

} // namespace qmem
