// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the raw2raw Project.

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "raw2raw/annotation.hpp"
#include "raw2raw/error.hpp"
#include "raw2raw/evalkit.hpp"
#include "raw2raw/rawio.hpp"

namespace raw2raw::tools {

/// Frames stored for every paired scene.
inline constexpr const char *kPairFrames[] = {"a_chart", "b_chart", "a_free", "b_free"};

struct PairInfo
{
    std::string id;
    std::string split; // "anchor" or "test"
    std::filesystem::path dir;
    std::vector<Patch> flat_regions;
    std::vector<Patch> achromatic;
};

/// On-disk dataset:
///   unpaired_A/*.raw16, unpaired_B/*.raw16,
///   pairs/<id>/{a_chart,b_chart,a_free,b_free}.raw16 + scene.json
///   [+ annotation.json], profile_A.json, profile_B.json.
class DatasetLayout
{
public:
    explicit DatasetLayout(std::filesystem::path root);

    const std::filesystem::path &root() const { return root_; }

    /// Pairs sorted by id; optionally only one split.
    std::vector<PairInfo> pairs(const std::string &split = {}) const;
    /// Error(Io) when the pair does not exist.
    PairInfo pair(const std::string &id) const;
    bool has_pair(const std::string &id) const;

    std::filesystem::path frame_path(const std::string &pair_id, const std::string &frame) const;
    RawFrame load_frame(const std::string &pair_id, const std::string &frame) const;
    PackedImage load_image(const std::string &pair_id, const std::string &frame) const;

    std::vector<std::filesystem::path> unpaired(char camera) const;
    eval::CameraColorProfile profile(char camera) const;

    std::filesystem::path annotation_path(const std::string &pair_id) const;
    std::optional<AnnotationRecord> load_annotation(const std::string &pair_id) const;
    /// Atomic replace (temporary file + rename).
    void save_annotation(const AnnotationRecord &record) const;

private:
    std::filesystem::path root_;
};

/// Sorted *.raw16 files of a directory, or the path itself for a file.
std::vector<std::filesystem::path> list_frames(const std::filesystem::path &path);

/// Annotation built from the chart patches stored in the chart frames and
/// the scene's flat regions (at most `max_regions`).
AnnotationRecord automatic_annotation(const DatasetLayout &layout, const std::string &pair_id,
                                      std::size_t max_regions = 6);

} // namespace raw2raw::tools
