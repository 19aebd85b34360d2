// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the raw2raw Project.

#pragma once

#include <array>
#include <filesystem>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "raw2raw/image.hpp"

namespace raw2raw::eval {

/// Camera raw (white balanced) to CIE XYZ.
struct CameraColorProfile
{
    std::array<double, 9> xyz_matrix{1, 0, 0, 0, 1, 0, 0, 0, 1}; // row-major
    std::string camera_id;

    Vec3 apply(const Vec3 &rgb) const;
};

CameraColorProfile load_profile(const std::filesystem::path &path);
void save_profile(const CameraColorProfile &profile, const std::filesystem::path &path);

inline constexpr double kPsnrInfinity = std::numeric_limits<double>::infinity();
/// Value written in place of the infinite PSNR sentinel in CSV output and
/// used when aggregating.
inline constexpr double kPsnrCap = 99.0;

double psnr(const PackedImage &x, const PackedImage &y);
double mae(const PackedImage &x, const PackedImage &y);

struct SsimParams
{
    double k1 = 0.01;
    double k2 = 0.03;
    int window = 11;
    double sigma = 1.5;
    double peak = 1.0;
};

/// Mean local SSIM with a Gaussian window over the fully covered region,
/// computed per channel and averaged. Images smaller than the window use the
/// largest odd window that fits.
double ssim(const PackedImage &x, const PackedImage &y, const SsimParams &params = {});

/// Unit-norm illuminant color. With patches, the robust mean of the given
/// achromatic patches; otherwise the gray-world average.
Vec3 estimate_illuminant(const PackedImage &img, std::span<const Patch> achromatic_patches = {});

/// D65 white, Y normalized to 1.
inline constexpr Vec3 kD65White{0.95047, 1.0, 1.08883};

Vec3 xyz_to_lab(const Vec3 &xyz, const Vec3 &white = kD65White);

struct LabImage
{
    int height = 0;
    int width = 0;
    std::vector<Vec3> pixels;
};

/// White balance by `illum` (channel c divided by illum_c / max(illum)),
/// camera-to-XYZ via `profile`, then XYZ to Lab against `white`.
LabImage raw_to_lab(const PackedImage &img, const Vec3 &illum, const CameraColorProfile &profile,
                    const Vec3 &white = kD65White);

/// CIEDE2000 color difference with kL = kC = kH = 1.
double ciede2000(const Vec3 &lab1, const Vec3 &lab2);

/// Mean CIEDE2000 over pixels.
double delta_e_2000(const LabImage &a, const LabImage &b);

struct MetricRow
{
    std::string name;
    double psnr = 0;
    double ssim = 0;
    double mae = 0;
    double delta_e = 0;
};

struct MetricSummary
{
    double mean = 0;
    double std = 0;
};

struct MetricsReport
{
    std::string method;
    std::string direction;
    std::vector<MetricRow> rows;
    MetricSummary psnr, ssim, mae, delta_e;
    SsimParams ssim_params;

    std::string to_table() const;
    std::string to_csv() const;
};

/// Fills the aggregate columns from `rows` (sample standard deviation, zero
/// for a single row; infinite PSNR counts as kPsnrCap).
void aggregate(MetricsReport &report);

enum class IlluminantPolicy {
    /// Ground-truth illuminant applied to both images.
    SharedGroundTruth,
    /// Gray-world on each image independently.
    PerImageGrayWorld,
    /// Gray-world for the mapped image, chart/metadata for the ground truth.
    MappedGrayWorld,
};

struct EvalItem
{
    std::string name;
    PackedImage mapped;
    PackedImage ground_truth;
    std::optional<Vec3> gt_illuminant;
    std::vector<Patch> gt_achromatic;
};

/// Ground-truth illuminant: metadata, else achromatic patches, else gray-world.
Vec3 ground_truth_illuminant(const EvalItem &item);

MetricRow evaluate_pair(const EvalItem &item, const CameraColorProfile &profile, IlluminantPolicy policy,
                        const SsimParams &ssim_params = {});

MetricsReport evaluate(std::span<const EvalItem> items, const CameraColorProfile &profile,
                       IlluminantPolicy policy, std::string method, std::string direction,
                       const SsimParams &ssim_params = {});

} // namespace raw2raw::eval
