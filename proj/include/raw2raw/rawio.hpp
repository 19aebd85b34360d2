// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the raw2raw Project.

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "raw2raw/image.hpp"

namespace raw2raw {

enum class CfaPattern { RGGB, BGGR, GRBG, GBRG, None3Ch };

std::string_view to_string(CfaPattern p);
CfaPattern cfa_from_string(std::string_view s);

/// Everything in a sidecar except the pixels.
///
/// Black levels are indexed by packed channel (R, G1, G2, B). For
/// three-channel frames R uses index 0, G index 1 and B index 3.
struct FrameMetadata
{
    int width = 0;
    int height = 0;
    CfaPattern cfa = CfaPattern::RGGB;
    std::array<double, 4> black_level{};
    double white_level = 0.0;
    int bit_depth = 16;
    std::string camera_id;
    std::optional<Vec3> illuminant;
    /// Chart patch coordinates, in packed image space.
    std::vector<LabeledPatch> chart_patches;

    int payload_channels() const { return cfa == CfaPattern::None3Ch ? 3 : 1; }
    int packed_channels() const { return cfa == CfaPattern::None3Ch ? 3 : 4; }
    int packed_width() const { return cfa == CfaPattern::None3Ch ? width : width / 2; }
    int packed_height() const { return cfa == CfaPattern::None3Ch ? height : height / 2; }
    double black_for_packed_channel(int c) const;
};

struct RawFrame
{
    FrameMetadata meta;
    /// Row-major sensor counts; interleaved RGB for three-channel frames.
    std::vector<std::uint16_t> pixels;
};

/// Throws Error(Metadata) or Error(CorruptPayload) when an invariant is broken.
void validate(const RawFrame &frame);
void validate(const FrameMetadata &meta);

/// Sidecar path for a container: `<stem>.json` next to `<stem>.raw16`.
std::filesystem::path sidecar_path(const std::filesystem::path &path);
std::filesystem::path payload_path(const std::filesystem::path &path);

RawFrame load_frame(const std::filesystem::path &path);
void save_frame(const RawFrame &frame, const std::filesystem::path &path);

FrameMetadata parse_sidecar(const std::string &json_text);
std::string serialize_sidecar(const FrameMetadata &meta);

/// Black-level subtraction, scaling to [0,1] and Bayer packing.
PackedImage normalize(const RawFrame &frame);

/// Quantizes a packed image back to sensor counts using `meta`.
RawFrame unpack(const PackedImage &img, const FrameMetadata &meta);

/// Builds a 16-bit three-channel frame (black 0, white 65535) from a
/// normalized image, used to persist synthetic and mapped results.
RawFrame frame_from_image(const PackedImage &img, std::optional<Vec3> illuminant = std::nullopt,
                          std::vector<LabeledPatch> chart = {});

PackedImage load_image(const std::filesystem::path &path);

/// Raw visualization: greens averaged, then an encoding gamma of 1/1.6.
struct PreviewImage
{
    int height = 0;
    int width = 0;
    std::vector<float> data; // h x w x 3

    float at(int y, int x, int c) const { return data[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
};

inline constexpr double kPreviewGamma = 1.0 / 1.6;

PreviewImage render_preview(const PackedImage &img);

/// 8-bit RGB PNG encoding of a preview.
std::vector<std::uint8_t> encode_png(const PreviewImage &preview);

} // namespace raw2raw
