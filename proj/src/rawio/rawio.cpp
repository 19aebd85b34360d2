// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the raw2raw Project.

#include "raw2raw/rawio.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>

#include "json.hpp"
#include "raw2raw/error.hpp"

namespace raw2raw {

using nlohmann::json;

std::string_view to_string(CfaPattern p)
{
    switch (p) {
    case CfaPattern::RGGB: return "RGGB";
    case CfaPattern::BGGR: return "BGGR";
    case CfaPattern::GRBG: return "GRBG";
    case CfaPattern::GBRG: return "GBRG";
    case CfaPattern::None3Ch: return "NONE_3CH";
    }
    return "?";
}

CfaPattern cfa_from_string(std::string_view s)
{
    for (auto p : {CfaPattern::RGGB, CfaPattern::BGGR, CfaPattern::GRBG, CfaPattern::GBRG,
                   CfaPattern::None3Ch}) {
        if (to_string(p) == s)
            return p;
    }
    throw Error(ErrorCode::Metadata, "unknown cfa_pattern '" + std::string(s) + "'");
}

namespace {

// Packed channel index for each site of the 2x2 tile, in raster order.
std::array<int, 4> tile_to_packed(CfaPattern p)
{
    switch (p) {
    case CfaPattern::RGGB: return {0, 1, 2, 3};
    case CfaPattern::BGGR: return {3, 1, 2, 0};
    case CfaPattern::GRBG: return {1, 0, 3, 2};
    case CfaPattern::GBRG: return {1, 3, 0, 2};
    case CfaPattern::None3Ch: break;
    }
    throw Error(ErrorCode::Metadata, "pattern has no 2x2 tile");
}

constexpr std::array<int, 3> kRgbBlackIndex{0, 1, 3};

double max_count(int bit_depth) { return std::ldexp(1.0, bit_depth) - 1.0; }

} // namespace

double FrameMetadata::black_for_packed_channel(int c) const
{
    return cfa == CfaPattern::None3Ch ? black_level[kRgbBlackIndex[c]] : black_level[c];
}

PackedImage to_rgb(const PackedImage &img)
{
    if (img.channels == 3)
        return img;
    if (img.channels != 4)
        throw Error(ErrorCode::Shape, "expected 3 or 4 channels, got " + std::to_string(img.channels));
    PackedImage out(img.height, img.width, 3);
    out.camera_id = img.camera_id;
    for (std::size_t i = 0; i < img.pixel_count(); ++i) {
        const float *p = &img.data[i * 4];
        out.data[i * 3 + 0] = p[0];
        out.data[i * 3 + 1] = 0.5f * (p[1] + p[2]);
        out.data[i * 3 + 2] = p[3];
    }
    return out;
}

void validate(const FrameMetadata &meta)
{
    if (meta.width <= 0 || meta.height <= 0)
        throw Error(ErrorCode::Metadata, "non-positive dimensions");
    if (meta.bit_depth < 1 || meta.bit_depth > 16)
        throw Error(ErrorCode::Metadata, "bit_depth must be in [1,16]");
    if (meta.cfa != CfaPattern::None3Ch && (meta.width % 2 != 0 || meta.height % 2 != 0))
        throw Error(ErrorCode::Metadata, "mosaiced frames need even width and height");
    if (meta.white_level > max_count(meta.bit_depth))
        throw Error(ErrorCode::Metadata, "white_level exceeds 2^bit_depth - 1");
    for (double b : meta.black_level) {
        if (!(b < meta.white_level) || b < 0)
            throw Error(ErrorCode::Metadata, "black_level must be in [0, white_level)");
    }
    for (const auto &lp : meta.chart_patches) {
        if (lp.patch.size < 2 || !lp.patch.inside(meta.packed_width(), meta.packed_height()))
            throw Error(ErrorCode::Metadata, "chart patch '" + lp.label + "' out of bounds");
    }
}

void validate(const RawFrame &frame)
{
    validate(frame.meta);
    const auto expected = static_cast<std::size_t>(frame.meta.width) * frame.meta.height *
                          frame.meta.payload_channels();
    if (frame.pixels.size() != expected)
        throw Error(ErrorCode::CorruptPayload, "payload holds " + std::to_string(frame.pixels.size()) +
                                                   " values, expected " + std::to_string(expected));
    const double limit = max_count(frame.meta.bit_depth);
    for (std::size_t i = 0; i < frame.pixels.size(); ++i) {
        if (frame.pixels[i] > limit)
            throw Error(ErrorCode::CorruptPayload, "pixel " + std::to_string(i) + " exceeds 2^bit_depth - 1");
    }
}

std::filesystem::path sidecar_path(const std::filesystem::path &path)
{
    auto p = path;
    return p.replace_extension(".json");
}

std::filesystem::path payload_path(const std::filesystem::path &path)
{
    auto p = path;
    return p.replace_extension(".raw16");
}

FrameMetadata parse_sidecar(const std::string &json_text)
{
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception &e) {
        throw Error(ErrorCode::Metadata, std::string("sidecar is not valid JSON: ") + e.what());
    }
    for (const char *key :
         {"width", "height", "cfa_pattern", "black_level", "white_level", "bit_depth", "camera_id"}) {
        if (!j.contains(key))
            throw Error(ErrorCode::Metadata, std::string("missing sidecar field '") + key + "'");
    }

    FrameMetadata m;
    try {
        m.width = j.at("width").get<int>();
        m.height = j.at("height").get<int>();
        m.cfa = cfa_from_string(j.at("cfa_pattern").get<std::string>());
        const auto &bl = j.at("black_level");
        if (bl.is_number()) {
            m.black_level.fill(bl.get<double>());
        } else if (bl.is_array() && bl.size() == 4) {
            for (int i = 0; i < 4; ++i)
                m.black_level[i] = bl[i].get<double>();
        } else {
            throw Error(ErrorCode::Metadata, "black_level must be a scalar or a 4-array");
        }
        m.white_level = j.at("white_level").get<double>();
        m.bit_depth = j.at("bit_depth").get<int>();
        m.camera_id = j.at("camera_id").get<std::string>();
        if (j.contains("illuminant")) {
            const auto &il = j.at("illuminant");
            if (!il.is_array() || il.size() != 3)
                throw Error(ErrorCode::Metadata, "illuminant must be a 3-array");
            m.illuminant = Vec3{il[0].get<double>(), il[1].get<double>(), il[2].get<double>()};
        }
        if (j.contains("chart_patches")) {
            for (const auto &p : j.at("chart_patches")) {
                LabeledPatch lp;
                lp.patch = {p.at("x").get<int>(), p.at("y").get<int>(), p.at("size").get<int>()};
                lp.label = p.value("label", std::string());
                m.chart_patches.push_back(lp);
            }
        }
    } catch (const json::exception &e) {
        throw Error(ErrorCode::Metadata, std::string("malformed sidecar: ") + e.what());
    }
    return m;
}

std::string serialize_sidecar(const FrameMetadata &m)
{
    json j;
    j["width"] = m.width;
    j["height"] = m.height;
    j["cfa_pattern"] = std::string(to_string(m.cfa));
    if (std::all_of(m.black_level.begin(), m.black_level.end(),
                    [&](double b) { return b == m.black_level[0]; }))
        j["black_level"] = m.black_level[0];
    else
        j["black_level"] = m.black_level;
    j["white_level"] = m.white_level;
    j["bit_depth"] = m.bit_depth;
    j["camera_id"] = m.camera_id;
    if (m.illuminant)
        j["illuminant"] = *m.illuminant;
    if (!m.chart_patches.empty()) {
        json patches = json::array();
        for (const auto &lp : m.chart_patches)
            patches.push_back({{"x", lp.patch.x}, {"y", lp.patch.y}, {"size", lp.patch.size}, {"label", lp.label}});
        j["chart_patches"] = patches;
    }
    return j.dump(2) + "\n";
}

RawFrame load_frame(const std::filesystem::path &path)
{
    const auto side = sidecar_path(path);
    std::ifstream sf(side);
    if (!sf)
        throw Error(ErrorCode::Io, "cannot open sidecar " + side.string());
    std::stringstream ss;
    ss << sf.rdbuf();

    RawFrame frame;
    frame.meta = parse_sidecar(ss.str());
    validate(frame.meta);

    const auto payload = payload_path(path);
    std::ifstream pf(payload, std::ios::binary);
    if (!pf)
        throw Error(ErrorCode::Io, "cannot open payload " + payload.string());
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(pf)), std::istreambuf_iterator<char>());

    const auto count = static_cast<std::size_t>(frame.meta.width) * frame.meta.height *
                       frame.meta.payload_channels();
    if (bytes.size() != count * 2)
        throw Error(ErrorCode::CorruptPayload, "payload is " + std::to_string(bytes.size()) + " bytes, expected " +
                                                   std::to_string(count * 2));
    frame.pixels.resize(count);
    for (std::size_t i = 0; i < count; ++i)
        frame.pixels[i] = static_cast<std::uint16_t>(bytes[2 * i] | (bytes[2 * i + 1] << 8));
    validate(frame);
    return frame;
}

void save_frame(const RawFrame &frame, const std::filesystem::path &path)
{
    validate(frame);
    if (path.has_parent_path())
        std::filesystem::create_directories(path.parent_path());

    std::vector<unsigned char> bytes(frame.pixels.size() * 2);
    for (std::size_t i = 0; i < frame.pixels.size(); ++i) {
        bytes[2 * i] = static_cast<unsigned char>(frame.pixels[i] & 0xff);
        bytes[2 * i + 1] = static_cast<unsigned char>(frame.pixels[i] >> 8);
    }
    std::ofstream pf(payload_path(path), std::ios::binary);
    pf.write(reinterpret_cast<const char *>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    std::ofstream sf(sidecar_path(path));
    sf << serialize_sidecar(frame.meta);
    if (!pf || !sf)
        throw Error(ErrorCode::Io, "failed writing " + path.string());
}

PackedImage normalize(const RawFrame &frame)
{
    const auto &m = frame.meta;
    for (double b : m.black_level) {
        if (m.white_level <= b)
            throw Error(ErrorCode::DegenerateRange, "white_level must exceed black_level");
    }
    validate(frame);

    PackedImage out(m.packed_height(), m.packed_width(), m.packed_channels());
    out.camera_id = m.camera_id;
    auto scale = [&](std::uint16_t v, int packed_c) {
        const double b = m.black_for_packed_channel(packed_c);
        const double x = (double(v) - b) / (m.white_level - b);
        return static_cast<float>(std::clamp(x, 0.0, 1.0));
    };

    if (m.cfa == CfaPattern::None3Ch) {
        for (std::size_t i = 0; i < frame.pixels.size(); ++i)
            out.data[i] = scale(frame.pixels[i], static_cast<int>(i % 3));
        return out;
    }

    const auto map = tile_to_packed(m.cfa);
    for (int y = 0; y < out.height; ++y) {
        for (int x = 0; x < out.width; ++x) {
            for (int site = 0; site < 4; ++site) {
                const int sy = 2 * y + site / 2;
                const int sx = 2 * x + site % 2;
                const int c = map[site];
                out.at(y, x, c) = scale(frame.pixels[static_cast<std::size_t>(sy) * m.width + sx], c);
            }
        }
    }
    return out;
}

RawFrame unpack(const PackedImage &img, const FrameMetadata &meta)
{
    if (img.channels != meta.packed_channels() || img.width != meta.packed_width() ||
        img.height != meta.packed_height())
        throw Error(ErrorCode::Shape, "packed image does not match frame metadata");

    RawFrame frame;
    frame.meta = meta;
    frame.pixels.resize(static_cast<std::size_t>(meta.width) * meta.height * meta.payload_channels());
    const double limit = max_count(meta.bit_depth);
    auto quantize = [&](float v, int packed_c) {
        const double b = meta.black_for_packed_channel(packed_c);
        const double x = std::clamp(double(v), 0.0, 1.0);
        const double count = std::round(x * (meta.white_level - b) + b);
        return static_cast<std::uint16_t>(std::clamp(count, 0.0, limit));
    };

    if (meta.cfa == CfaPattern::None3Ch) {
        for (std::size_t i = 0; i < img.data.size(); ++i)
            frame.pixels[i] = quantize(img.data[i], static_cast<int>(i % 3));
        return frame;
    }
    const auto map = tile_to_packed(meta.cfa);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            for (int site = 0; site < 4; ++site) {
                const int sy = 2 * y + site / 2;
                const int sx = 2 * x + site % 2;
                frame.pixels[static_cast<std::size_t>(sy) * meta.width + sx] =
                    quantize(img.at(y, x, map[site]), map[site]);
            }
        }
    }
    return frame;
}

RawFrame frame_from_image(const PackedImage &img, std::optional<Vec3> illuminant, std::vector<LabeledPatch> chart)
{
    FrameMetadata meta;
    if (img.channels == 3) {
        meta.cfa = CfaPattern::None3Ch;
        meta.width = img.width;
        meta.height = img.height;
    } else if (img.channels == 4) {
        meta.cfa = CfaPattern::RGGB;
        meta.width = img.width * 2;
        meta.height = img.height * 2;
    } else {
        throw Error(ErrorCode::Shape, "cannot store a " + std::to_string(img.channels) + "-channel image");
    }
    meta.black_level.fill(0.0);
    meta.white_level = 65535.0;
    meta.bit_depth = 16;
    meta.camera_id = img.camera_id;
    meta.illuminant = illuminant;
    meta.chart_patches = std::move(chart);
    return unpack(img, meta);
}

PackedImage load_image(const std::filesystem::path &path) { return normalize(load_frame(path)); }

PreviewImage render_preview(const PackedImage &img)
{
    if (img.channels != 3 && img.channels != 4)
        throw Error(ErrorCode::Shape, "preview needs 3 or 4 channels");
    PreviewImage out;
    out.height = img.height;
    out.width = img.width;
    out.data.resize(img.pixel_count() * 3);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            const Vec3 rgb = img.rgb(y, x);
            for (int c = 0; c < 3; ++c) {
                const double v = std::clamp(rgb[c], 0.0, 1.0);
                out.data[(static_cast<std::size_t>(y) * img.width + x) * 3 + c] =
                    static_cast<float>(std::pow(v, kPreviewGamma));
            }
        }
    }
    return out;
}

} // namespace raw2raw
