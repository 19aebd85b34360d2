// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the raw2raw Project.

#pragma once

#include <vector>

#include "raw2raw/image.hpp"

namespace raw2raw {

/// Per-channel mean after discarding values more than `mad_factor` median
/// absolute deviations from the channel median. Four-channel images are
/// reduced to RGB first. Throws Error(Bounds) for patches outside the image.
Vec3 robust_patch_mean(const PackedImage &img, const Patch &patch, double mad_factor = 2.0);

/// Plain per-channel mean and standard deviation over a patch, in the
/// image's own channel layout.
struct PatchMoments
{
    std::vector<double> mean;
    std::vector<double> stddev;
};

PatchMoments patch_moments(const PackedImage &img, const Patch &patch);

} // namespace raw2raw
