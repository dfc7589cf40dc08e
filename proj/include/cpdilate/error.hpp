#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cpdilate {

enum class ErrorCode {
    NonHermitian,
    NonSquare,
    NotPsd,
    DimensionMismatch,
    AlgebraMismatch,
    InvalidAlgebra,
    LevelOutOfRange,
    ModuleMismatch,
    NotFlagCompatible,
    IndexOutOfRange,
    BadMultiplicity,
    NotCp,
    GramNotPsd,
    CompatFail,
    NotMinimal,
    NotEquivalent,
    ShapeMismatch,
    NotInCommutant,
    NotDominated,
    NotWellDefined,
    NotNondegenerate,
    SchemaError,
    VersionUnsupported,
    IoError,
};

constexpr std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
    case ErrorCode::NonHermitian: return "NON_HERMITIAN";
    case ErrorCode::NonSquare: return "NON_SQUARE";
    case ErrorCode::NotPsd: return "NOT_PSD";
    case ErrorCode::DimensionMismatch: return "DIMENSION_MISMATCH";
    case ErrorCode::AlgebraMismatch: return "ALGEBRA_MISMATCH";
    case ErrorCode::InvalidAlgebra: return "INVALID_ALGEBRA";
    case ErrorCode::LevelOutOfRange: return "LEVEL_OUT_OF_RANGE";
    case ErrorCode::ModuleMismatch: return "MODULE_MISMATCH";
    case ErrorCode::NotFlagCompatible: return "NOT_FLAG_COMPATIBLE";
    case ErrorCode::IndexOutOfRange: return "INDEX_OUT_OF_RANGE";
    case ErrorCode::BadMultiplicity: return "BAD_MULTIPLICITY";
    case ErrorCode::NotCp: return "NOT_CP";
    case ErrorCode::GramNotPsd: return "GRAM_NOT_PSD";
    case ErrorCode::CompatFail: return "COMPAT_FAIL";
    case ErrorCode::NotMinimal: return "NOT_MINIMAL";
    case ErrorCode::NotEquivalent: return "NOT_EQUIVALENT";
    case ErrorCode::ShapeMismatch: return "SHAPE_MISMATCH";
    case ErrorCode::NotInCommutant: return "NOT_IN_COMMUTANT";
    case ErrorCode::NotDominated: return "NOT_DOMINATED";
    case ErrorCode::NotWellDefined: return "NOT_WELL_DEFINED";
    case ErrorCode::NotNondegenerate: return "NOT_NONDEGENERATE";
    case ErrorCode::SchemaError: return "SCHEMA_ERROR";
    case ErrorCode::VersionUnsupported: return "VERSION_UNSUPPORTED";
    case ErrorCode::IoError: return "IO_ERROR";
    }
    return "UNKNOWN";
}

/// Every failure in the library surfaces as this exception; `code()` is the
/// machine-readable category, `what()` carries the detail.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& detail)
        : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace cpdilate
