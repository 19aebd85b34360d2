// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the raw2raw Project.

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>

#include "raw2raw/error.hpp"
#include "raw2raw/rawio.hpp"

namespace raw2raw {

std::vector<std::uint8_t> encode_png(const PreviewImage &preview)
{
    std::vector<png_byte> rgb(preview.data.size());
    for (std::size_t i = 0; i < rgb.size(); ++i)
        rgb[i] = static_cast<png_byte>(std::lround(std::clamp(preview.data[i], 0.0f, 1.0f) * 255.0f));

    png_image image;
    std::memset(&image, 0, sizeof(image));
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(preview.width);
    image.height = static_cast<png_uint_32>(preview.height);
    image.format = PNG_FORMAT_RGB;

    png_alloc_size_t size = 0;
    if (!png_image_write_to_memory(&image, nullptr, &size, 0, rgb.data(), 0, nullptr))
        throw Error(ErrorCode::Io, std::string("png sizing failed: ") + image.message);
    std::vector<std::uint8_t> out(size);
    if (!png_image_write_to_memory(&image, out.data(), &size, 0, rgb.data(), 0, nullptr))
        throw Error(ErrorCode::Io, std::string("png encoding failed: ") + image.message);
    out.resize(size);
    return out;
}

} // namespace raw2raw
