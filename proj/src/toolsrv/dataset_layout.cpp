// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the raw2raw Project.

#include "raw2raw/toolsrv/dataset_layout.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace raw2raw::tools {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string read_text(const fs::path &p)
{
    std::ifstream in(p);
    if (!in)
        throw Error(ErrorCode::Io, "cannot open " + p.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<Patch> patches_from(const json &arr)
{
    std::vector<Patch> out;
    for (const auto &p : arr)
        out.push_back({p.at("x").get<int>(), p.at("y").get<int>(), p.at("size").get<int>()});
    return out;
}

bool valid_id(const std::string &id)
{
    if (id.empty() || id == "." || id == "..")
        return false;
    return std::all_of(id.begin(), id.end(),
                       [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-'; });
}

} // namespace

DatasetLayout::DatasetLayout(fs::path root) : root_(std::move(root))
{
    if (!fs::is_directory(root_))
        throw Error(ErrorCode::Io, "dataset root " + root_.string() + " is not a directory");
}

bool DatasetLayout::has_pair(const std::string &id) const
{
    return valid_id(id) && fs::is_directory(root_ / "pairs" / id);
}

PairInfo DatasetLayout::pair(const std::string &id) const
{
    if (!has_pair(id))
        throw Error(ErrorCode::Io, "no pair '" + id + "' under " + root_.string());
    PairInfo info;
    info.id = id;
    info.dir = root_ / "pairs" / id;
    const fs::path scene = info.dir / "scene.json";
    if (fs::exists(scene)) {
        try {
            const json j = json::parse(read_text(scene));
            info.split = j.value("split", std::string());
            if (j.contains("flat_regions"))
                info.flat_regions = patches_from(j.at("flat_regions"));
            if (j.contains("achromatic"))
                info.achromatic = patches_from(j.at("achromatic"));
        } catch (const json::exception &e) {
            throw Error(ErrorCode::Metadata, "malformed " + scene.string() + ": " + e.what());
        }
    }
    return info;
}

std::vector<PairInfo> DatasetLayout::pairs(const std::string &split) const
{
    std::vector<std::string> ids;
    const fs::path dir = root_ / "pairs";
    if (fs::is_directory(dir))
        for (const auto &e : fs::directory_iterator(dir))
            if (e.is_directory() && valid_id(e.path().filename().string()))
                ids.push_back(e.path().filename().string());
    std::sort(ids.begin(), ids.end());
    std::vector<PairInfo> out;
    for (const auto &id : ids) {
        PairInfo p = pair(id);
        if (split.empty() || p.split == split)
            out.push_back(std::move(p));
    }
    return out;
}

fs::path DatasetLayout::frame_path(const std::string &pair_id, const std::string &frame) const
{
    if (std::find(std::begin(kPairFrames), std::end(kPairFrames), frame) == std::end(kPairFrames))
        throw Error(ErrorCode::Io, "unknown frame '" + frame + "'");
    return pair(pair_id).dir / (frame + ".raw16");
}

RawFrame DatasetLayout::load_frame(const std::string &pair_id, const std::string &frame) const
{
    return raw2raw::load_frame(frame_path(pair_id, frame));
}

PackedImage DatasetLayout::load_image(const std::string &pair_id, const std::string &frame) const
{
    return raw2raw::load_image(frame_path(pair_id, frame));
}

std::vector<fs::path> DatasetLayout::unpaired(char camera) const
{
    const fs::path dir = root_ / (camera == 'A' ? "unpaired_A" : "unpaired_B");
    if (!fs::is_directory(dir))
        return {};
    return list_frames(dir);
}

eval::CameraColorProfile DatasetLayout::profile(char camera) const
{
    return eval::load_profile(root_ / (camera == 'A' ? "profile_A.json" : "profile_B.json"));
}

fs::path DatasetLayout::annotation_path(const std::string &pair_id) const
{
    return pair(pair_id).dir / "annotation.json";
}

std::optional<AnnotationRecord> DatasetLayout::load_annotation(const std::string &pair_id) const
{
    const fs::path p = annotation_path(pair_id);
    if (!fs::exists(p))
        return std::nullopt;
    return AnnotationRecord::from_json(read_text(p));
}

void DatasetLayout::save_annotation(const AnnotationRecord &record) const
{
    const fs::path p = annotation_path(record.pair_id);
    fs::path tmp = p;
    tmp += ".tmp";
    {
        std::ofstream out(tmp);
        out << record.to_json() << '\n';
        if (!out)
            throw Error(ErrorCode::Io, "cannot write " + tmp.string());
    }
    fs::rename(tmp, p);
}

std::vector<fs::path> list_frames(const fs::path &path)
{
    if (fs::is_regular_file(path))
        return {path};
    if (!fs::is_directory(path))
        throw Error(ErrorCode::Io, path.string() + " does not exist");
    std::vector<fs::path> out;
    for (const auto &e : fs::directory_iterator(path))
        if (e.is_regular_file() && e.path().extension() == ".raw16")
            out.push_back(e.path());
    std::sort(out.begin(), out.end());
    return out;
}

AnnotationRecord automatic_annotation(const DatasetLayout &layout, const std::string &pair_id,
                                      std::size_t max_regions)
{
    const PairInfo info = layout.pair(pair_id);
    AnnotationRecord r;
    r.pair_id = pair_id;
    r.chart_a = layout.load_frame(pair_id, "a_chart").meta.chart_patches;
    r.chart_b = layout.load_frame(pair_id, "b_chart").meta.chart_patches;
    for (std::size_t i = 0; i < info.flat_regions.size() && i < max_regions; ++i)
        r.regions.push_back({info.flat_regions[i], info.flat_regions[i]});
    return r;
}

} // namespace raw2raw::tools
