// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the raw2raw Project.

#include "raw2raw/calibfit.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <sstream>
#include <tuple>

#include "json.hpp"
#include "raw2raw/error.hpp"
#include "raw2raw/patch_stats.hpp"

namespace raw2raw::calib {

using nlohmann::json;

std::string_view to_string(Kernel k) { return k == Kernel::Identity ? "IDENTITY" : "POLY11"; }

Kernel kernel_from_string(std::string_view s)
{
    if (s == "IDENTITY" || s == "identity" || s == "3x3")
        return Kernel::Identity;
    if (s == "POLY11" || s == "poly11" || s == "poly")
        return Kernel::Poly11;
    throw Error(ErrorCode::Config, "unknown kernel '" + std::string(s) + "'");
}

int kernel_size(Kernel k) { return k == Kernel::Identity ? 3 : 11; }

std::vector<double> expand_kernel(const Vec3 &c, Kernel k)
{
    const double r = c[0], g = c[1], b = c[2];
    if (k == Kernel::Identity)
        return {r, g, b};
    return {r, g, b, r * g, r * b, g * b, r * r, g * g, b * b, r * g * b, 1.0};
}

namespace {

const char *term_name(Kernel k, int i)
{
    static const char *names[] = {"R", "G", "B", "RG", "RB", "GB", "R^2", "G^2", "B^2", "RGB", "1"};
    (void)k;
    return names[i];
}

bool finite_unit(const Vec3 &v)
{
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x) && x >= 0.0 && x <= 1.0; });
}

} // namespace

Vec3 CalibrationMap::apply(const Vec3 &rgb) const
{
    const auto phi = expand_kernel(rgb, kernel);
    const int k = terms();
    Vec3 out{};
    for (int r = 0; r < 3; ++r) {
        double s = 0;
        for (int j = 0; j < k; ++j)
            s += m[static_cast<std::size_t>(r * k + j)] * phi[j];
        out[r] = s;
    }
    return out;
}

void CalibrationMap::validate() const
{
    if (m.size() != static_cast<std::size_t>(3 * terms()))
        throw Error(ErrorCode::Shape, "matrix has " + std::to_string(m.size()) + " entries, kernel " +
                                          std::string(to_string(kernel)) + " needs " + std::to_string(3 * terms()));
    for (double v : m)
        if (!std::isfinite(v))
            throw Error(ErrorCode::Numeric, "calibration matrix is not finite");
}

std::string CalibrationMap::to_json() const
{
    json j{{"kernel", std::string(to_string(kernel))},
           {"M", m},
           {"src_camera", src_camera},
           {"dst_camera", dst_camera},
           {"fit_residual_rms", fit_residual_rms}};
    return j.dump(2) + "\n";
}

CalibrationMap CalibrationMap::from_json(const std::string &text)
{
    CalibrationMap map;
    try {
        const json j = json::parse(text);
        map.kernel = kernel_from_string(j.at("kernel").get<std::string>());
        map.m = j.at("M").get<std::vector<double>>();
        map.src_camera = j.value("src_camera", std::string());
        map.dst_camera = j.value("dst_camera", std::string());
        map.fit_residual_rms = j.value("fit_residual_rms", 0.0);
    } catch (const json::exception &e) {
        throw Error(ErrorCode::Metadata, std::string("malformed calibration map: ") + e.what());
    }
    map.validate();
    return map;
}

CalibrationMap CalibrationMap::identity()
{
    CalibrationMap map;
    map.kernel = Kernel::Identity;
    map.m = {1, 0, 0, 0, 1, 0, 0, 0, 1};
    return map;
}

CalibrationMap fit_map(std::span<const ColorSamplePair> samples, Kernel kernel, const FitOptions &opt)
{
    const int k = kernel_size(kernel);
    std::vector<ColorSamplePair> sorted;
    for (const auto &s : samples) {
        if (!finite_unit(s.src) || !finite_unit(s.dst))
            throw Error(ErrorCode::Config, "sample colors must be finite and within [0,1]");
        if (!(s.weight > 0) || !std::isfinite(s.weight))
            throw Error(ErrorCode::Config, "sample weights must be positive");
        sorted.push_back(s);
    }
    std::sort(sorted.begin(), sorted.end(), [](const ColorSamplePair &a, const ColorSamplePair &b) {
        return std::tie(a.src, a.dst, a.weight, a.origin) < std::tie(b.src, b.dst, b.weight, b.origin);
    });

    const auto n = static_cast<Eigen::Index>(sorted.size());
    if (n < k)
        throw Error(ErrorCode::SingularFit, std::to_string(n) + " samples cannot determine the " + std::to_string(k) +
                                                " terms of kernel " + std::string(to_string(kernel)));

    Eigen::MatrixXd design(n, k);
    Eigen::MatrixXd target(n, 3);
    double weight_sum = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto &s = sorted[static_cast<std::size_t>(i)];
        const double sw = std::sqrt(s.weight);
        const auto phi = expand_kernel(s.src, kernel);
        for (int j = 0; j < k; ++j)
            design(i, j) = sw * phi[j];
        for (int c = 0; c < 3; ++c)
            target(i, c) = sw * s.dst[c];
        weight_sum += s.weight;
    }

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(design, Eigen::ComputeThinV);
    const auto &sv = svd.singularValues();
    const double smax = sv(0);
    const double tol = std::max<double>(n, k) * std::numeric_limits<double>::epsilon() * smax;
    if (!(smax > 0) || sv(k - 1) <= tol) {
        // Name the weakest direction in terms of kernel terms.
        const Eigen::VectorXd v = svd.matrixV().col(k - 1);
        std::ostringstream msg;
        msg << "design matrix is rank deficient (";
        int rank = 0;
        for (int j = 0; j < k; ++j)
            rank += sv(j) > tol;
        msg << "rank " << rank << " of " << k << "); null direction involves";
        for (int j = 0; j < k; ++j)
            if (std::abs(v(j)) > 0.1)
                msg << " " << term_name(kernel, j);
        throw Error(ErrorCode::SingularFit, msg.str());
    }

    Eigen::MatrixXd solution; // k x 3
    if (smax / sv(k - 1) > opt.ridge_condition && opt.ridge > 0) {
        const double lambda = opt.ridge * design.squaredNorm() / k; // trace(PhiT W Phi) / k
        Eigen::MatrixXd aug(n + k, k);
        aug << design, std::sqrt(lambda) * Eigen::MatrixXd::Identity(k, k);
        Eigen::MatrixXd rhs(n + k, 3);
        rhs << target, Eigen::MatrixXd::Zero(k, 3);
        solution = aug.colPivHouseholderQr().solve(rhs);
    } else {
        solution = design.colPivHouseholderQr().solve(target);
    }

    CalibrationMap map;
    map.kernel = kernel;
    map.m.resize(static_cast<std::size_t>(3 * k));
    for (int r = 0; r < 3; ++r)
        for (int j = 0; j < k; ++j)
            map.m[static_cast<std::size_t>(r * k + j)] = solution(j, r);
    map.validate();

    const Eigen::MatrixXd resid = design * solution - target;
    map.fit_residual_rms = std::sqrt(resid.squaredNorm() / weight_sum);
    return map;
}

MappedImage apply_map(const PackedImage &img, const CalibrationMap &map)
{
    map.validate();
    if (img.channels != 3 && img.channels != 4)
        throw Error(ErrorCode::Shape, "calibration maps apply to 3- or 4-channel images");
    MappedImage out;
    out.image = PackedImage(img.height, img.width, img.channels);
    out.image.camera_id = map.dst_camera.empty() ? img.camera_id : map.dst_camera;
    std::size_t outside = 0;
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            const Vec3 v = map.apply(img.rgb(y, x));
            std::array<float, 3> c{};
            for (int i = 0; i < 3; ++i) {
                outside += (v[i] < 0.0 || v[i] > 1.0) ? 1 : 0;
                c[i] = static_cast<float>(std::clamp(v[i], 0.0, 1.0));
            }
            float *p = &out.image.data[out.image.index(y, x, 0)];
            if (img.channels == 3) {
                p[0] = c[0], p[1] = c[1], p[2] = c[2];
            } else {
                p[0] = c[0], p[1] = c[1], p[2] = c[1], p[3] = c[2];
            }
        }
    const double total = 3.0 * static_cast<double>(img.pixel_count());
    out.out_of_gamut_fraction = total > 0 ? static_cast<double>(outside) / total : 0.0;
    return out;
}

std::vector<Vec3> extract_chart_colors(const PackedImage &img, std::span<const Patch> patches)
{
    std::vector<Vec3> out;
    out.reserve(patches.size());
    for (const auto &p : patches) {
        if (p.size < 2)
            throw Error(ErrorCode::Bounds, "chart patches need size >= 2");
        out.push_back(robust_patch_mean(img, p));
    }
    return out;
}

std::vector<Vec3> extract_chart_colors(const PackedImage &img, std::span<const LabeledPatch> patches)
{
    std::vector<Patch> plain;
    for (const auto &lp : patches)
        plain.push_back(lp.patch);
    return extract_chart_colors(img, plain);
}

float patch_max(const PackedImage &img, const Patch &patch)
{
    if (!patch.inside(img.width, img.height))
        throw Error(ErrorCode::Bounds, "patch outside the image");
    float m = 0.0f;
    for (int y = patch.y; y < patch.y + patch.size; ++y)
        for (int x = patch.x; x < patch.x + patch.size; ++x)
            for (int c = 0; c < img.channels; ++c)
                m = std::max(m, img.at(y, x, c));
    return m;
}

std::vector<ColorSamplePair> annotation_samples(const PackedImage &a_chart, const PackedImage &b_chart,
                                                const AnnotationRecord &record, const AnchorOptions &opt)
{
    if (record.chart_a.size() != record.chart_b.size())
        throw Error(ErrorCode::Metadata, "chart patch lists differ in length for pair '" + record.pair_id + "'");
    std::vector<ColorSamplePair> samples;
    const auto ca = extract_chart_colors(a_chart, std::span<const LabeledPatch>(record.chart_a));
    const auto cb = extract_chart_colors(b_chart, std::span<const LabeledPatch>(record.chart_b));
    auto saturated = [&](const Patch &pa, const Patch &pb) {
        return patch_max(a_chart, pa) >= opt.saturation || patch_max(b_chart, pb) >= opt.saturation;
    };
    for (std::size_t i = 0; i < ca.size(); ++i)
        if (!saturated(record.chart_a[i].patch, record.chart_b[i].patch))
            samples.push_back({ca[i], cb[i], SampleOrigin::Chart, opt.chart_weight});
    for (const auto &r : record.regions) {
        if (saturated(r.patch_a, r.patch_b))
            continue;
        const Vec3 a = extract_chart_colors(a_chart, std::span<const Patch>(&r.patch_a, 1))[0];
        const Vec3 b = extract_chart_colors(b_chart, std::span<const Patch>(&r.patch_b, 1))[0];
        samples.push_back({a, b, SampleOrigin::AnnotatedRegion, opt.region_weight});
    }
    return samples;
}

AnchorBuild build_anchor_pair(const PackedImage &a_chart, const PackedImage &a_free, const PackedImage &b_chart,
                              const PackedImage &b_free, const AnnotationRecord &record, const AnchorOptions &opt)
{
    const auto ab = annotation_samples(a_chart, b_chart, record, opt);
    std::vector<ColorSamplePair> ba;
    for (const auto &s : ab)
        ba.push_back({s.dst, s.src, s.origin, s.weight});

    AnchorBuild out;
    out.map_ab = fit_map(ab, opt.kernel, opt.fit);
    out.map_ab.src_camera = a_free.camera_id;
    out.map_ab.dst_camera = b_free.camera_id;
    out.map_ba = fit_map(ba, opt.kernel, opt.fit);
    out.map_ba.src_camera = b_free.camera_id;
    out.map_ba.dst_camera = a_free.camera_id;

    const std::string suffix = std::string(to_string(opt.kernel)) + ", " + std::to_string(record.chart_a.size()) +
                               " chart + " + std::to_string(record.regions.size()) + " region samples";
    out.a_to_b = {a_free, apply_map(a_free, out.map_ab).image, "A->B " + suffix, record.pair_id};
    out.b_to_a = {apply_map(b_free, out.map_ba).image, b_free, "B->A " + suffix, record.pair_id};
    return out;
}

} // namespace raw2raw::calib
