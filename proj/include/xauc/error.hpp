#pragma once

#include <stdexcept>
#include <string>

namespace xauc {

// Every failure the toolkit can report, grouped by the process exit code the
// CLI maps it to: input/validation problems exit 2, insufficient-data
// conditions exit 3, numeric failures exit 4.
enum class ErrorKind {
    // input / validation
    MalformedLine,
    InvalidScore,
    InvalidLabel,
    DuplicateKey,
    UnknownDataset,
    MixedLabelVideo,
    SameDataset,
    MalformedFixture,
    UnknownFixture,
    InvalidSpec,
    InvalidRange,
    EmptyRegionSet,
    OutOfBoundsLandmarks,
    ShapeMismatch,
    InvalidSigma,
    InvalidTransform,
    IndivisibleDims,
    UnknownRegionId,
    InvalidCount,
    DimMismatch,
    // insufficient data
    EmptyClass,
    TooFewDatasets,
    NoCrossCells,
    NoUsableFakeImages,
    NoUsablePairs,
    EmptyBatch,
    // numeric
    ZeroNormVector,
    DivergenceDetected,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const { return kind_; }

private:
    ErrorKind kind_;
};

inline const char* error_name(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::MalformedLine: return "MalformedLine";
        case ErrorKind::InvalidScore: return "InvalidScore";
        case ErrorKind::InvalidLabel: return "InvalidLabel";
        case ErrorKind::DuplicateKey: return "DuplicateKey";
        case ErrorKind::UnknownDataset: return "UnknownDataset";
        case ErrorKind::MixedLabelVideo: return "MixedLabelVideo";
        case ErrorKind::SameDataset: return "SameDataset";
        case ErrorKind::MalformedFixture: return "MalformedFixture";
        case ErrorKind::UnknownFixture: return "UnknownFixture";
        case ErrorKind::InvalidSpec: return "InvalidSpec";
        case ErrorKind::InvalidRange: return "InvalidRange";
        case ErrorKind::EmptyRegionSet: return "EmptyRegionSet";
        case ErrorKind::OutOfBoundsLandmarks: return "OutOfBoundsLandmarks";
        case ErrorKind::ShapeMismatch: return "ShapeMismatch";
        case ErrorKind::InvalidSigma: return "InvalidSigma";
        case ErrorKind::InvalidTransform: return "InvalidTransform";
        case ErrorKind::IndivisibleDims: return "IndivisibleDims";
        case ErrorKind::UnknownRegionId: return "UnknownRegionId";
        case ErrorKind::InvalidCount: return "InvalidCount";
        case ErrorKind::DimMismatch: return "DimMismatch";
        case ErrorKind::EmptyClass: return "EmptyClass";
        case ErrorKind::TooFewDatasets: return "TooFewDatasets";
        case ErrorKind::NoCrossCells: return "NoCrossCells";
        case ErrorKind::NoUsableFakeImages: return "NoUsableFakeImages";
        case ErrorKind::NoUsablePairs: return "NoUsablePairs";
        case ErrorKind::EmptyBatch: return "EmptyBatch";
        case ErrorKind::ZeroNormVector: return "ZeroNormVector";
        case ErrorKind::DivergenceDetected: return "DivergenceDetected";
    }
    return "Unknown";
}

// CLI exit codes: 0 success, 2 invalid input, 3 insufficient data, 4 numeric failure.
inline int exit_code_for(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::EmptyClass:
        case ErrorKind::TooFewDatasets:
        case ErrorKind::NoCrossCells:
        case ErrorKind::NoUsableFakeImages:
        case ErrorKind::NoUsablePairs:
        case ErrorKind::EmptyBatch:
            return 3;
        case ErrorKind::ZeroNormVector:
        case ErrorKind::DivergenceDetected:
            return 4;
        default:
            return 2;
    }
}

}  // namespace xauc
