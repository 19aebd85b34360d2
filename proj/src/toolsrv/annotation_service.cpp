// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the raw2raw Project.

#include "raw2raw/toolsrv/annotation_service.hpp"

#include <algorithm>

#include "raw2raw/calibfit.hpp"
#include "raw2raw/error.hpp"
#include "raw2raw/rawio.hpp"

namespace raw2raw::tools {

namespace {

std::string describe(const Patch &p)
{
    return "{x: " + std::to_string(p.x) + ", y: " + std::to_string(p.y) + ", size: " + std::to_string(p.size) + "}";
}

} // namespace

AnnotationService::AnnotationService(std::filesystem::path root, double homogeneity_threshold)
    : layout_(std::move(root)), threshold_(homogeneity_threshold)
{
}

std::vector<PairInfo> AnnotationService::pairs() const
{
    return layout_.pairs();
}

std::shared_ptr<const AnnotationService::PairImages> AnnotationService::images_for(const std::string &pair_id) const
{
    if (!layout_.has_pair(pair_id))
        throw ServiceError(404, "no pair '" + pair_id + "'");
    {
        std::lock_guard lock(cache_mutex_);
        if (auto it = cache_.find(pair_id); it != cache_.end())
            return it->second;
    }
    auto imgs = std::make_shared<PairImages>();
    imgs->a_chart = layout_.load_image(pair_id, "a_chart");
    imgs->b_chart = layout_.load_image(pair_id, "b_chart");
    imgs->a_free = layout_.load_image(pair_id, "a_free");
    std::lock_guard lock(cache_mutex_);
    return cache_.emplace(pair_id, std::move(imgs)).first->second;
}

std::mutex &AnnotationService::pair_mutex(const std::string &pair_id)
{
    std::lock_guard lock(locks_mutex_);
    auto &m = locks_[pair_id];
    if (!m)
        m = std::make_unique<std::mutex>();
    return *m;
}

AnnotationRecord AnnotationService::record(const std::string &pair_id) const
{
    if (!layout_.has_pair(pair_id))
        throw ServiceError(404, "no pair '" + pair_id + "'");
    if (auto r = layout_.load_annotation(pair_id))
        return *r;
    AnnotationRecord r;
    r.pair_id = pair_id;
    return r;
}

void AnnotationService::check_patch(const PackedImage &img, const Patch &p, const std::string &what) const
{
    if (p.size < 2)
        throw ServiceError(400, what + " " + describe(p) + " is smaller than 2 pixels");
    if (!p.inside(img.width, img.height))
        throw ServiceError(400, what + " " + describe(p) + " lies outside the " + std::to_string(img.width) + "x" +
                                    std::to_string(img.height) + " image");
}

void AnnotationService::validate(const AnnotationRecord &record) const
{
    const auto imgs = images_for(record.pair_id);
    if (record.chart_a.size() != record.chart_b.size())
        throw ServiceError(400, "chart_a and chart_b must list the same number of patches");
    for (std::size_t i = 0; i < record.chart_a.size(); ++i) {
        check_patch(imgs->a_chart, record.chart_a[i].patch, "chart_a patch " + std::to_string(i));
        check_patch(imgs->b_chart, record.chart_b[i].patch, "chart_b patch " + std::to_string(i));
    }
    for (std::size_t i = 0; i < record.regions.size(); ++i) {
        const auto &r = record.regions[i];
        check_patch(imgs->a_chart, r.patch_a, "region " + std::to_string(i) + " patch_a");
        check_patch(imgs->b_chart, r.patch_b, "region " + std::to_string(i) + " patch_b");
        const auto ha = homogeneity_check(imgs->a_chart, r.patch_a, threshold_);
        const auto hb = homogeneity_check(imgs->b_chart, r.patch_b, threshold_);
        if (!ha.pass || !hb.pass)
            throw ServiceError(400, "region " + std::to_string(i) + " is not homogeneous (cv " +
                                        std::to_string(std::max(ha.cv, hb.cv)) + ", threshold " +
                                        std::to_string(threshold_) + ")");
    }
}

FitSummary AnnotationService::fit(const AnnotationRecord &record) const
{
    const auto imgs = images_for(record.pair_id);
    calib::AnchorOptions opt;
    opt.kernel = calib::Kernel::Poly11;
    FitSummary s;
    std::vector<calib::ColorSamplePair> samples;
    try {
        samples = calib::annotation_samples(imgs->a_chart, imgs->b_chart, record, opt);
    } catch (const Error &e) {
        throw ServiceError(400, e.what());
    }
    s.n_samples = static_cast<int>(samples.size());
    if (s.n_samples < kMinCommitSamples) {
        s.diagnostic = "a polynomial fit needs at least " + std::to_string(kMinCommitSamples) + " samples, have " +
                       std::to_string(s.n_samples);
        return s;
    }
    try {
        const auto map = calib::fit_map(samples, calib::Kernel::Poly11, opt.fit);
        s.residual_rms = map.fit_residual_rms;
        s.out_of_gamut_fraction = calib::apply_map(imgs->a_free, map).out_of_gamut_fraction;
    } catch (const Error &e) {
        if (e.code() != ErrorCode::SingularFit)
            throw;
        s.diagnostic = e.what();
    }
    return s;
}

FitSummary AnnotationService::fit(const std::string &pair_id) const
{
    return fit(record(pair_id));
}

MutationResult AnnotationService::store(AnnotationRecord record)
{
    record.status = AnnotationStatus::Draft;
    record.residual_rms.reset();
    record.content_hash = record.compute_hash();
    MutationResult res;
    res.fit = fit(record);
    layout_.save_annotation(record);
    res.record = std::move(record);
    return res;
}

MutationResult AnnotationService::set_chart(const std::string &pair_id, std::vector<LabeledPatch> chart_a,
                                            std::vector<LabeledPatch> chart_b)
{
    std::lock_guard lock(pair_mutex(pair_id));
    AnnotationRecord r = record(pair_id);
    r.chart_a = std::move(chart_a);
    r.chart_b = std::move(chart_b);
    validate(r);
    return store(std::move(r));
}

MutationResult AnnotationService::add_region(const std::string &pair_id, const RegionCorrespondence &region)
{
    std::lock_guard lock(pair_mutex(pair_id));
    AnnotationRecord r = record(pair_id);
    const auto imgs = images_for(pair_id);
    check_patch(imgs->a_chart, region.patch_a, "patch_a");
    check_patch(imgs->b_chart, region.patch_b, "patch_b");
    r.regions.push_back(region);
    validate(r);
    MutationResult res = store(std::move(r));
    res.homogeneity = {homogeneity_check(imgs->a_chart, region.patch_a, threshold_),
                       homogeneity_check(imgs->b_chart, region.patch_b, threshold_)};
    return res;
}

MutationResult AnnotationService::delete_region(const std::string &pair_id, std::size_t index)
{
    std::lock_guard lock(pair_mutex(pair_id));
    AnnotationRecord r = record(pair_id);
    if (index >= r.regions.size())
        throw ServiceError(404, "region index " + std::to_string(index) + " out of range (" +
                                    std::to_string(r.regions.size()) + " regions)");
    r.regions.erase(r.regions.begin() + static_cast<std::ptrdiff_t>(index));
    return store(std::move(r));
}

MutationResult AnnotationService::commit(const std::string &pair_id)
{
    std::lock_guard lock(pair_mutex(pair_id));
    AnnotationRecord r = record(pair_id);
    validate(r);
    MutationResult res;
    res.fit = fit(r);
    if (!res.fit.residual_rms)
        throw ServiceError(422, "cannot commit: " + res.fit.diagnostic);
    r.status = AnnotationStatus::Committed;
    r.residual_rms = res.fit.residual_rms;
    r.content_hash = r.compute_hash();
    layout_.save_annotation(r);
    res.record = std::move(r);
    return res;
}

std::vector<AnnotationService::ImageInfo> AnnotationService::images(const std::string &pair_id) const
{
    if (!layout_.has_pair(pair_id))
        throw ServiceError(404, "no pair '" + pair_id + "'");
    std::vector<ImageInfo> out;
    for (const char *f : kPairFrames) {
        const auto meta = layout_.load_frame(pair_id, f).meta;
        out.push_back({pair_id + "." + f, meta.packed_width(), meta.packed_height()});
    }
    return out;
}

std::vector<std::uint8_t> AnnotationService::preview_png(const std::string &image_id) const
{
    const auto dot = image_id.rfind('.');
    if (dot == std::string::npos)
        throw ServiceError(404, "image ids have the form <pair>.<frame>");
    const std::string pair = image_id.substr(0, dot), frame = image_id.substr(dot + 1);
    if (!layout_.has_pair(pair) ||
        std::find(std::begin(kPairFrames), std::end(kPairFrames), frame) == std::end(kPairFrames))
        throw ServiceError(404, "no image '" + image_id + "'");
    return encode_png(render_preview(layout_.load_image(pair, frame)));
}

} // namespace raw2raw::tools
