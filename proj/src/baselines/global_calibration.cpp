// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the raw2raw Project.

#include "raw2raw/baselines.hpp"

namespace raw2raw::baselines {

eval::EvalItem eval_item(const TestPair &pair, Direction direction, PackedImage mapped)
{
    eval::EvalItem item;
    item.name = pair.name;
    item.mapped = std::move(mapped);
    item.ground_truth = direction == Direction::A2B ? pair.b : pair.a;
    item.gt_illuminant = direction == Direction::A2B ? pair.illuminant_b : pair.illuminant_a;
    item.gt_achromatic = pair.achromatic;
    return item;
}

eval::MetricRow mean_row(std::span<const TestPair> tests, const RunOptions &opt, const std::string &name,
                         const std::function<PackedImage(const PackedImage &)> &map)
{
    if (tests.empty())
        throw Error(ErrorCode::Config, "the test set is empty");
    eval::MetricRow acc;
    acc.name = name;
    for (const auto &t : tests) {
        const PackedImage &src = opt.direction == Direction::A2B ? t.a : t.b;
        const auto row = eval::evaluate_pair(eval_item(t, opt.direction, map(src)), opt.profile, opt.policy, opt.ssim);
        acc.psnr += std::min(row.psnr, eval::kPsnrCap);
        acc.ssim += row.ssim;
        acc.mae += row.mae;
        acc.delta_e += row.delta_e;
    }
    const double n = static_cast<double>(tests.size());
    acc.psnr /= n;
    acc.ssim /= n;
    acc.mae /= n;
    acc.delta_e /= n;
    return acc;
}

eval::MetricsReport global_calibration_run(std::span<const CalibrationAnchor> anchors,
                                           std::span<const TestPair> tests, calib::Kernel kernel,
                                           const RunOptions &opt, const calib::AnchorOptions &anchor_opt)
{
    if (anchors.empty())
        throw Error(ErrorCode::Config, "global calibration needs at least one anchor pair");
    calib::AnchorOptions ao = anchor_opt;
    ao.kernel = kernel;
    eval::MetricsReport rep;
    rep.method = kernel == calib::Kernel::Identity ? kLabelGlobal3x3 : kLabelGlobalPoly;
    rep.direction = std::string(to_string(opt.direction));
    rep.ssim_params = opt.ssim;
    for (const auto &anchor : anchors) {
        auto samples = calib::annotation_samples(anchor.a_chart, anchor.b_chart, anchor.record, ao);
        if (opt.direction == Direction::B2A)
            for (auto &s : samples)
                std::swap(s.src, s.dst);
        calib::CalibrationMap map = calib::fit_map(samples, kernel, ao.fit);
        rep.rows.push_back(mean_row(tests, opt, anchor.id,
                                    [&](const PackedImage &img) { return calib::apply_map(img, map).image; }));
    }
    eval::aggregate(rep);
    return rep;
}

eval::MetricsReport identity_run(std::span<const TestPair> tests, const RunOptions &opt)
{
    eval::MetricsReport rep;
    rep.method = "identity";
    rep.direction = std::string(to_string(opt.direction));
    rep.ssim_params = opt.ssim;
    rep.rows.push_back(mean_row(tests, opt, "identity", [](const PackedImage &img) { return img; }));
    eval::aggregate(rep);
    return rep;
}

} // namespace raw2raw::baselines
