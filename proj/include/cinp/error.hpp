#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cinp {

enum class ErrorCode {
    ShapeMismatch,
    ZeroNorm,
    NonScalarLoss,
    MissingGradient,
    StepOutOfRange,
    BadCohortSpec,
    ZeroVarianceRoi,
    BadRatio,
    BadConfig,
    BadTemperature,
    BadHyper,
    TooFewReferences,
    TooFewSamples,
    DegenerateLabels,
    LengthMismatch,
    AucOnMulticlass,
    ParseError,
    ValidationError,
    UnknownKey,
    CorruptCheckpoint,
    VersionMismatch,
    UsageError,
    IoError,
};

std::string_view to_string(ErrorCode code);

// Every failure surfaced by the library carries one of the codes above so that
// callers (the CLI in particular) can map it onto an exit status.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

    // Input/configuration problems, as opposed to failures while running.
    bool is_validation() const noexcept;

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
    throw Error(code, message);
}

}  // namespace cinp
