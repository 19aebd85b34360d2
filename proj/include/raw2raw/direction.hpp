// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the raw2raw Project.

#pragma once

#include <string>
#include <string_view>

#include "raw2raw/error.hpp"

namespace raw2raw {

/// Mapping direction between the two cameras of a dataset.
enum class Direction { A2B, B2A };

inline std::string_view to_string(Direction d)
{
    return d == Direction::A2B ? "A2B" : "B2A";
}

inline Direction direction_from_string(std::string_view s)
{
    if (s == "A2B" || s == "a2b")
        return Direction::A2B;
    if (s == "B2A" || s == "b2a")
        return Direction::B2A;
    throw Error(ErrorCode::Config, "unknown direction '" + std::string(s) + "' (expected A2B or B2A)");
}

} // namespace raw2raw
