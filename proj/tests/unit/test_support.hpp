// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the raw2raw Project.

#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "raw2raw/image.hpp"

namespace raw2raw::test {

/// Fresh, empty scratch directory under the build tree.
std::filesystem::path scratch_dir(const std::string &name);

PackedImage random_image(std::mt19937_64 &rng, int h, int w, int c, float lo = 0.0f, float hi = 1.0f);

} // namespace raw2raw::test
