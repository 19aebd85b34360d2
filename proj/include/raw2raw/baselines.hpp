// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the raw2raw Project.

#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "raw2raw/calibfit.hpp"
#include "raw2raw/direction.hpp"
#include "raw2raw/evalkit.hpp"

namespace raw2raw::baselines {

inline constexpr const char *kLabelGlobal3x3 = "global-3x3";
inline constexpr const char *kLabelGlobalPoly = "global-poly";
inline constexpr const char *kLabelFda = "fda";

/// A held-out scene seen by both cameras.
struct TestPair
{
    std::string name;
    PackedImage a, b;
    std::optional<Vec3> illuminant_a, illuminant_b;
    /// Achromatic patches, valid in both images.
    std::vector<Patch> achromatic;
};

/// Chart captures of one anchor scene with their correspondences.
struct CalibrationAnchor
{
    std::string id;
    PackedImage a_chart, b_chart;
    AnnotationRecord record;
};

struct RunOptions
{
    Direction direction = Direction::A2B;
    /// Profile of the target camera.
    eval::CameraColorProfile profile;
    eval::IlluminantPolicy policy = eval::IlluminantPolicy::SharedGroundTruth;
    eval::SsimParams ssim;
};

/// Evaluation item for `mapped` against the target-side image of `pair`.
eval::EvalItem eval_item(const TestPair &pair, Direction direction, PackedImage mapped);

/// Metric row averaged over all test pairs for one mapping function.
eval::MetricRow mean_row(std::span<const TestPair> tests, const RunOptions &opt, const std::string &name,
                         const std::function<PackedImage(const PackedImage &)> &map);

/// One repetition per anchor: fit a map on its chart (and region) samples,
/// apply it to every test image, average the metrics. Rows are repetitions;
/// aggregates are mean and std across them.
eval::MetricsReport global_calibration_run(std::span<const CalibrationAnchor> anchors,
                                           std::span<const TestPair> tests, calib::Kernel kernel,
                                           const RunOptions &opt, const calib::AnchorOptions &anchor_opt = {});

struct FdaConfig
{
    double beta = 0.01;

    void validate() const;
};

/// Swaps the low-frequency amplitude of `src` with the target's inside the
/// window |k_y|, |k_x| < floor(beta * min(h, w)) (signed frequency indices),
/// keeps src phase, then clips to [0,1]. The target is bilinearly resized to
/// the source size when they differ.
PackedImage fda_map(const PackedImage &src, const PackedImage &target, const FdaConfig &cfg = {});

/// Single-plane swap without clipping; `src` and `target` are h x w.
std::vector<double> fda_swap_plane(const std::vector<double> &src, const std::vector<double> &target, int h, int w,
                                   double beta);

PackedImage resize_bilinear(const PackedImage &img, int height, int width);

/// One repetition per target-camera anchor image.
eval::MetricsReport fda_run(std::span<const PackedImage> target_anchors, std::span<const TestPair> tests,
                            const FdaConfig &cfg, const RunOptions &opt);

/// Unmapped source images scored against the targets.
eval::MetricsReport identity_run(std::span<const TestPair> tests, const RunOptions &opt);

} // namespace raw2raw::baselines
