#pragma once
#include <stdexcept>
#include <string>
#include <string_view>

namespace proxymtl {

enum class ErrorCode {
    DimensionMismatch,
    NotPSD,
    NonFinite,
    ParseError,
    MissingFile,
    NegativeThreshold,
    SVDFailure,
    ConvergenceFailure,
    EmptyGrid,
    InvalidArgument,
    OverlapWithShift,
    TargetUnreachable,
};

constexpr std::string_view to_string(ErrorCode c)
{
    switch (c) {
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::NotPSD: return "NotPSD";
        case ErrorCode::NonFinite: return "NonFinite";
        case ErrorCode::ParseError: return "ParseError";
        case ErrorCode::MissingFile: return "MissingFile";
        case ErrorCode::NegativeThreshold: return "NegativeThreshold";
        case ErrorCode::SVDFailure: return "SVDFailure";
        case ErrorCode::ConvergenceFailure: return "ConvergenceFailure";
        case ErrorCode::EmptyGrid: return "EmptyGrid";
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::OverlapWithShift: return "OverlapWithShift";
        case ErrorCode::TargetUnreachable: return "TargetUnreachable";
    }
    return "Unknown";
}

/// Exception carrying a machine-readable error kind.
class Error : public std::runtime_error
{
public:
    Error(ErrorCode code, const std::string& msg)
        : std::runtime_error(std::string(to_string(code)) + ": " + msg), code_(code)
    {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

namespace detail {

inline void require(bool cond, ErrorCode code, const std::string& msg)
{
    if (!cond) throw Error(code, msg);
}

} // namespace detail
} // namespace proxymtl
