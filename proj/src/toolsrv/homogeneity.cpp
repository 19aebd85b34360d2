// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the raw2raw Project.

#include "raw2raw/toolsrv/homogeneity.hpp"

#include <cmath>
#include <limits>

#include "raw2raw/patch_stats.hpp"

namespace raw2raw::tools {

HomogeneityResult homogeneity_check(const PackedImage &img, const Patch &patch, double threshold)
{
    const PatchMoments m = patch_moments(img, patch);
    HomogeneityResult r;
    for (std::size_t c = 0; c < m.mean.size(); ++c) {
        double cv;
        if (m.mean[c] > 0)
            cv = m.stddev[c] / m.mean[c];
        else
            cv = m.stddev[c] == 0 ? 0.0 : std::numeric_limits<double>::infinity();
        r.cv = std::max(r.cv, cv);
    }
    r.pass = r.cv < threshold;
    return r;
}

} // namespace raw2raw::tools
