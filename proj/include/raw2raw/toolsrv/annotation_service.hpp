// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the raw2raw Project.

#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "raw2raw/annotation.hpp"
#include "raw2raw/error.hpp"
#include "raw2raw/toolsrv/dataset_layout.hpp"
#include "raw2raw/toolsrv/homogeneity.hpp"

namespace raw2raw::tools {

/// Failure carrying the HTTP status the service maps it to.
class ServiceError : public std::runtime_error
{
public:
    ServiceError(int status, const std::string &msg) : std::runtime_error(msg), status_(status) {}
    int status() const { return status_; }

private:
    int status_;
};

/// Samples needed for a POLY11 fit.
inline constexpr int kMinCommitSamples = 11;

struct FitSummary
{
    std::optional<double> residual_rms;
    double out_of_gamut_fraction = 0.0;
    int n_samples = 0;
    std::string diagnostic;
};

struct MutationResult
{
    AnnotationRecord record;
    FitSummary fit;
    std::vector<HomogeneityResult> homogeneity;
};

/// Annotation workflow over a dataset root, independent of transport.
/// Mutations of one pair are serialized; records are persisted after each
/// mutation as the pair's annotation.json.
class AnnotationService
{
public:
    explicit AnnotationService(std::filesystem::path root, double homogeneity_threshold = kHomogeneityThreshold);

    const DatasetLayout &layout() const { return layout_; }

    std::vector<PairInfo> pairs() const;
    /// Stored record, or an empty draft.
    AnnotationRecord record(const std::string &pair_id) const;

    MutationResult set_chart(const std::string &pair_id, std::vector<LabeledPatch> chart_a,
                             std::vector<LabeledPatch> chart_b);
    MutationResult add_region(const std::string &pair_id, const RegionCorrespondence &region);
    MutationResult delete_region(const std::string &pair_id, std::size_t index);
    /// 422 when fewer than kMinCommitSamples usable samples exist.
    MutationResult commit(const std::string &pair_id);

    FitSummary fit(const std::string &pair_id) const;
    FitSummary fit(const AnnotationRecord &record) const;

    /// Schema, bounds and homogeneity checks; throws ServiceError(400).
    void validate(const AnnotationRecord &record) const;

    /// Image ids have the form "<pair_id>.<frame>".
    std::vector<std::uint8_t> preview_png(const std::string &image_id) const;

    struct ImageInfo
    {
        std::string id;
        int width = 0;
        int height = 0;
    };
    std::vector<ImageInfo> images(const std::string &pair_id) const;

private:
    struct PairImages
    {
        PackedImage a_chart, b_chart, a_free;
    };
    std::shared_ptr<const PairImages> images_for(const std::string &pair_id) const;
    std::mutex &pair_mutex(const std::string &pair_id);
    void check_patch(const PackedImage &img, const Patch &p, const std::string &what) const;
    MutationResult store(AnnotationRecord record);

    DatasetLayout layout_;
    double threshold_;
    mutable std::mutex cache_mutex_;
    mutable std::map<std::string, std::shared_ptr<const PairImages>> cache_;
    std::mutex locks_mutex_;
    std::map<std::string, std::unique_ptr<std::mutex>> locks_;
};

} // namespace raw2raw::tools
