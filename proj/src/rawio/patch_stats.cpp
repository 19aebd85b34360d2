// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the raw2raw Project.

#include "raw2raw/patch_stats.hpp"

#include <algorithm>
#include <cmath>

#include "raw2raw/error.hpp"

namespace raw2raw {

namespace {

void require_inside(const PackedImage &img, const Patch &p)
{
    if (!p.inside(img.width, img.height))
        throw Error(ErrorCode::Bounds, "patch (" + std::to_string(p.x) + ", " + std::to_string(p.y) + ", " +
                                           std::to_string(p.size) + ") outside " + std::to_string(img.width) +
                                           "x" + std::to_string(img.height) + " image");
}

double median(std::vector<double> v)
{
    const auto mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    double m = v[mid];
    if (v.size() % 2 == 0) {
        const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
        m = 0.5 * (m + lo);
    }
    return m;
}

} // namespace

Vec3 robust_patch_mean(const PackedImage &img, const Patch &patch, double mad_factor)
{
    require_inside(img, patch);
    Vec3 out{};
    std::array<std::vector<double>, 3> values;
    for (int y = patch.y; y < patch.y + patch.size; ++y)
        for (int x = patch.x; x < patch.x + patch.size; ++x) {
            const Vec3 rgb = img.rgb(y, x);
            for (int c = 0; c < 3; ++c)
                values[c].push_back(rgb[c]);
        }
    for (int c = 0; c < 3; ++c) {
        const double med = median(values[c]);
        std::vector<double> dev(values[c].size());
        std::transform(values[c].begin(), values[c].end(), dev.begin(), [&](double v) { return std::abs(v - med); });
        const double mad = median(dev);
        double sum = 0;
        int n = 0;
        for (std::size_t i = 0; i < values[c].size(); ++i) {
            if (dev[i] <= mad_factor * mad) {
                sum += values[c][i];
                ++n;
            }
        }
        out[c] = n > 0 ? sum / n : med;
    }
    return out;
}

PatchMoments patch_moments(const PackedImage &img, const Patch &patch)
{
    require_inside(img, patch);
    PatchMoments m;
    m.mean.assign(img.channels, 0.0);
    m.stddev.assign(img.channels, 0.0);
    const double n = double(patch.size) * patch.size;
    for (int c = 0; c < img.channels; ++c) {
        double s = 0;
        for (int y = patch.y; y < patch.y + patch.size; ++y)
            for (int x = patch.x; x < patch.x + patch.size; ++x)
                s += img.at(y, x, c);
        const double mean = s / n;
        double ss = 0;
        for (int y = patch.y; y < patch.y + patch.size; ++y)
            for (int x = patch.x; x < patch.x + patch.size; ++x) {
                const double d = img.at(y, x, c) - mean;
                ss += d * d;
            }
        m.mean[c] = mean;
        m.stddev[c] = std::sqrt(ss / n);
    }
    return m;
}

} // namespace raw2raw
