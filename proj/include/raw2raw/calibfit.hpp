// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the raw2raw Project.

#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "raw2raw/annotation.hpp"
#include "raw2raw/image.hpp"

namespace raw2raw::calib {

enum class Kernel { Identity, Poly11 };

std::string_view to_string(Kernel k);
Kernel kernel_from_string(std::string_view s);
int kernel_size(Kernel k);

/// IDENTITY: (R, G, B). POLY11: (R, G, B, RG, RB, GB, R^2, G^2, B^2, RGB, 1).
std::vector<double> expand_kernel(const Vec3 &rgb, Kernel k);

enum class SampleOrigin { Chart, AnnotatedRegion };

struct ColorSamplePair
{
    Vec3 src{};
    Vec3 dst{};
    SampleOrigin origin = SampleOrigin::Chart;
    double weight = 1.0;
};

struct CalibrationMap
{
    Kernel kernel = Kernel::Identity;
    std::vector<double> m; // 3 x k, row-major
    std::string src_camera;
    std::string dst_camera;
    double fit_residual_rms = 0.0;

    int terms() const { return kernel_size(kernel); }
    Vec3 apply(const Vec3 &rgb) const;
    void validate() const;

    std::string to_json() const;
    static CalibrationMap from_json(const std::string &text);
    static CalibrationMap identity();
};

struct FitOptions
{
    /// Tikhonov weight, relative to trace(PhiT W Phi) / k.
    double ridge = 1e-8;
    /// The ridge is applied only when the weighted design's condition
    /// number exceeds this value.
    double ridge_condition = 1e6;
};

/// Weighted least squares for M in dst ~ M phi(src). Samples are put in a
/// canonical order first, so the result does not depend on input order.
/// Residual RMS is sqrt(sum w |dst - M phi(src)|^2 / sum w).
CalibrationMap fit_map(std::span<const ColorSamplePair> samples, Kernel kernel, const FitOptions &opt = {});

struct MappedImage
{
    PackedImage image;
    /// Fraction of output values that fell outside [0,1] before clipping.
    double out_of_gamut_fraction = 0.0;
};

/// Per-pixel M phi(I(x)), clipped to [0,1]. Four-channel inputs are mapped
/// in RGB (greens averaged) and the mapped green is written to both greens.
MappedImage apply_map(const PackedImage &img, const CalibrationMap &map);

/// Robust (2-MAD) mean color of each patch.
std::vector<Vec3> extract_chart_colors(const PackedImage &img, std::span<const Patch> patches);
std::vector<Vec3> extract_chart_colors(const PackedImage &img, std::span<const LabeledPatch> patches);

struct AnchorPair
{
    PackedImage image_a;
    PackedImage image_b;
    std::string map_description;
    std::string scene_id;
};

struct AnchorOptions
{
    Kernel kernel = Kernel::Poly11;
    double chart_weight = 1.0;
    double region_weight = 1.0;
    /// Patches holding a value at or above this level in either image are
    /// left out of the fit; clipped colors break the cross-camera relation.
    double saturation = 0.999;
    FitOptions fit;
};

/// Largest value of any channel inside the patch.
float patch_max(const PackedImage &img, const Patch &patch);

/// Correspondence samples of an annotation record, A as source. Saturated
/// correspondences are skipped.
std::vector<ColorSamplePair> annotation_samples(const PackedImage &a_chart, const PackedImage &b_chart,
                                                const AnnotationRecord &record, const AnchorOptions &opt = {});

struct AnchorBuild
{
    /// (original A, A mapped into B).
    AnchorPair a_to_b;
    /// (B mapped into A, original B).
    AnchorPair b_to_a;
    CalibrationMap map_ab;
    CalibrationMap map_ba;
};

AnchorBuild build_anchor_pair(const PackedImage &a_chart, const PackedImage &a_free, const PackedImage &b_chart,
                              const PackedImage &b_free, const AnnotationRecord &record,
                              const AnchorOptions &opt = {});

} // namespace raw2raw::calib
