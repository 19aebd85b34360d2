// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the raw2raw Project.

#pragma once

#include <stdexcept>
#include <string>

namespace raw2raw {

enum class ErrorCode {
    Io,
    Metadata,
    CorruptPayload,
    DegenerateRange,
    Shape,
    Grid,
    SingularFit,
    Bounds,
    Config,
    Numeric,
    DegenerateIlluminant,
    Arch,
};

const char *to_string(ErrorCode code);

/// Every data-level failure in the toolkit is reported through this type.
/// The CLI maps it to exit code 2.
class Error : public std::runtime_error
{
public:
    Error(ErrorCode code, const std::string &message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code)
    {
    }

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

inline const char *to_string(ErrorCode code)
{
    switch (code) {
    case ErrorCode::Io: return "io error";
    case ErrorCode::Metadata: return "metadata error";
    case ErrorCode::CorruptPayload: return "corrupt payload";
    case ErrorCode::DegenerateRange: return "degenerate range";
    case ErrorCode::Shape: return "shape error";
    case ErrorCode::Grid: return "grid error";
    case ErrorCode::SingularFit: return "singular fit";
    case ErrorCode::Bounds: return "bounds error";
    case ErrorCode::Config: return "config error";
    case ErrorCode::Numeric: return "numeric error";
    case ErrorCode::DegenerateIlluminant: return "degenerate illuminant";
    case ErrorCode::Arch: return "architecture error";
    }
    return "error";
}

} // namespace raw2raw
