// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the raw2raw Project.

#pragma once

#include "raw2raw/image.hpp"

namespace raw2raw::tools {

inline constexpr double kHomogeneityThreshold = 0.05;

struct HomogeneityResult
{
    bool pass = false;
    /// Largest per-channel coefficient of variation (std / mean).
    double cv = 0.0;
};

/// A channel with zero mean has cv 0 when constant and +inf otherwise.
HomogeneityResult homogeneity_check(const PackedImage &img, const Patch &patch,
                                    double threshold = kHomogeneityThreshold);

} // namespace raw2raw::tools
