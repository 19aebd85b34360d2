// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the raw2raw Project.

#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

namespace raw2raw {

using Vec3 = std::array<double, 3>;

/// Normalized sensor image, interleaved height x width x channels.
///
/// Four-channel images hold packed Bayer data in (R, G1, G2, B) order at half
/// the sensor resolution; three-channel images hold (R, G, B).
struct PackedImage
{
    int height = 0;
    int width = 0;
    int channels = 0;
    std::vector<float> data;
    std::string camera_id;

    PackedImage() = default;
    PackedImage(int h, int w, int c, float fill = 0.0f)
        : height(h), width(w), channels(c), data(static_cast<std::size_t>(h) * w * c, fill)
    {
    }

    std::size_t index(int y, int x, int c) const
    {
        return (static_cast<std::size_t>(y) * width + x) * channels + c;
    }
    float &at(int y, int x, int c) { return data[index(y, x, c)]; }
    float at(int y, int x, int c) const { return data[index(y, x, c)]; }

    std::size_t pixel_count() const { return static_cast<std::size_t>(height) * width; }
    bool same_shape(const PackedImage &o) const
    {
        return height == o.height && width == o.width && channels == o.channels;
    }

    /// Color of pixel (y, x) as RGB; packed greens are averaged.
    Vec3 rgb(int y, int x) const
    {
        const float *p = &data[index(y, x, 0)];
        if (channels == 4)
            return {p[0], 0.5 * (double(p[1]) + double(p[2])), p[3]};
        return {p[0], p[1], p[2]};
    }
};

/// Square region of an image, top-left corner plus side length, in packed
/// image coordinates.
struct Patch
{
    int x = 0;
    int y = 0;
    int size = 0;

    bool inside(int width, int height) const
    {
        return x >= 0 && y >= 0 && size >= 1 && x + size <= width && y + size <= height;
    }
    bool operator==(const Patch &) const = default;
};

struct LabeledPatch
{
    Patch patch;
    std::string label;
};

/// Collapses a packed 4-channel image to RGB by averaging the greens.
/// Three-channel input is returned unchanged.
PackedImage to_rgb(const PackedImage &img);

} // namespace raw2raw
