#include "cinp/error.hpp"

namespace cinp {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::ShapeMismatch: return "ShapeMismatch";
        case ErrorCode::ZeroNorm: return "ZeroNorm";
        case ErrorCode::NonScalarLoss: return "NonScalarLoss";
        case ErrorCode::MissingGradient: return "MissingGradient";
        case ErrorCode::StepOutOfRange: return "StepOutOfRange";
        case ErrorCode::BadCohortSpec: return "BadCohortSpec";
        case ErrorCode::ZeroVarianceRoi: return "ZeroVarianceRoi";
        case ErrorCode::BadRatio: return "BadRatio";
        case ErrorCode::BadConfig: return "BadConfig";
        case ErrorCode::BadTemperature: return "BadTemperature";
        case ErrorCode::BadHyper: return "BadHyper";
        case ErrorCode::TooFewReferences: return "TooFewReferences";
        case ErrorCode::TooFewSamples: return "TooFewSamples";
        case ErrorCode::DegenerateLabels: return "DegenerateLabels";
        case ErrorCode::LengthMismatch: return "LengthMismatch";
        case ErrorCode::AucOnMulticlass: return "AucOnMulticlass";
        case ErrorCode::ParseError: return "ParseError";
        case ErrorCode::ValidationError: return "ValidationError";
        case ErrorCode::UnknownKey: return "UnknownKey";
        case ErrorCode::CorruptCheckpoint: return "CorruptCheckpoint";
        case ErrorCode::VersionMismatch: return "VersionMismatch";
        case ErrorCode::UsageError: return "UsageError";
        case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

bool Error::is_validation() const noexcept {
    switch (code_) {
        case ErrorCode::ParseError:
        case ErrorCode::ValidationError:
        case ErrorCode::UnknownKey:
        case ErrorCode::UsageError:
        case ErrorCode::BadConfig:
        case ErrorCode::BadHyper:
        case ErrorCode::BadCohortSpec:
        case ErrorCode::BadRatio:
        case ErrorCode::TooFewReferences:
        case ErrorCode::TooFewSamples:
            return true;
        default:
            return false;
    }
}

}  // namespace cinp
