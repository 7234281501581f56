#pragma once

#include <stdexcept>
#include <string>

namespace swingsim {

/// Machine-readable failure categories. The CLI maps these onto process
/// exit codes (see `exit_code_for`).
enum class ErrorCode {
    // network validation
    DisconnectedGraph,
    MissingGenerator,
    MultipleGenerators,
    NoInverters,
    NominalImbalance,
    NonpositiveParameter,
    SelfLoop,
    DuplicateNodeId,
    UnknownNode,
    // controller / sharing
    SharingVectorUnnormalized,
    NonpositiveSharingEntry,
    ZeroGainDivision,
    GainOutOfRange,
    // core model
    NonpositiveInertia,
    DimensionMismatch,
    // simulation
    InvalidScenario,
    NonFiniteState,
    WindowTooLong,
    // dispatch optimization
    NonpositiveCost,
    DimensionTooLarge,
    ZeroDenominator,
    // device tier
    VoltageCollapse,
    // configuration files
    ParseError,
    SchemaError,
    IoError,
    // run-time checks
    AssertionFailure,
};

[[nodiscard]] constexpr const char* error_code_name(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::DisconnectedGraph: return "DisconnectedGraph";
        case ErrorCode::MissingGenerator: return "MissingGenerator";
        case ErrorCode::MultipleGenerators: return "MultipleGenerators";
        case ErrorCode::NoInverters: return "NoInverters";
        case ErrorCode::NominalImbalance: return "NominalImbalance";
        case ErrorCode::NonpositiveParameter: return "NonpositiveParameter";
        case ErrorCode::SelfLoop: return "SelfLoop";
        case ErrorCode::DuplicateNodeId: return "DuplicateNodeId";
        case ErrorCode::UnknownNode: return "UnknownNode";
        case ErrorCode::SharingVectorUnnormalized: return "SharingVectorUnnormalized";
        case ErrorCode::NonpositiveSharingEntry: return "NonpositiveSharingEntry";
        case ErrorCode::ZeroGainDivision: return "ZeroGainDivision";
        case ErrorCode::GainOutOfRange: return "GainOutOfRange";
        case ErrorCode::NonpositiveInertia: return "NonpositiveInertia";
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::InvalidScenario: return "InvalidScenario";
        case ErrorCode::NonFiniteState: return "NonFiniteState";
        case ErrorCode::WindowTooLong: return "WindowTooLong";
        case ErrorCode::NonpositiveCost: return "NonpositiveCost";
        case ErrorCode::DimensionTooLarge: return "DimensionTooLarge";
        case ErrorCode::ZeroDenominator: return "ZeroDenominator";
        case ErrorCode::VoltageCollapse: return "VoltageCollapse";
        case ErrorCode::ParseError: return "ParseError";
        case ErrorCode::SchemaError: return "SchemaError";
        case ErrorCode::IoError: return "IoError";
        case ErrorCode::AssertionFailure: return "AssertionFailure";
    }
    return "UnknownError";
}

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
          code_(code) {}

    [[nodiscard]] ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

/// Exit-code contract: 0 = all checks pass, 2 = validation error,
/// 3 = assertion failure, 4 = numerical divergence.
[[nodiscard]] constexpr int exit_code_for(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::NonFiniteState:
            return 4;
        case ErrorCode::AssertionFailure:
            return 3;
        default:
            return 2;
    }
}

}  // namespace swingsim
