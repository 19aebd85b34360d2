// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the raw2raw Project.

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "json.hpp"
#include "raw2raw/error.hpp"
#include "raw2raw/evalkit.hpp"
#include "raw2raw/patch_stats.hpp"

namespace raw2raw::eval {

using nlohmann::json;

Vec3 CameraColorProfile::apply(const Vec3 &rgb) const
{
    const auto &m = xyz_matrix;
    return {m[0] * rgb[0] + m[1] * rgb[1] + m[2] * rgb[2], m[3] * rgb[0] + m[4] * rgb[1] + m[5] * rgb[2],
            m[6] * rgb[0] + m[7] * rgb[1] + m[8] * rgb[2]};
}

CameraColorProfile load_profile(const std::filesystem::path &path)
{
    std::ifstream in(path);
    if (!in)
        throw Error(ErrorCode::Io, "cannot open profile " + path.string());
    CameraColorProfile p;
    try {
        json j = json::parse(in);
        p.camera_id = j.at("camera_id").get<std::string>();
        const auto &m = j.at("xyz_matrix");
        std::vector<double> flat;
        if (m.size() == 3 && m[0].is_array()) {
            for (const auto &row : m)
                for (const auto &v : row)
                    flat.push_back(v.get<double>());
        } else {
            flat = m.get<std::vector<double>>();
        }
        if (flat.size() != 9)
            throw Error(ErrorCode::Metadata, "xyz_matrix must have 9 entries");
        std::copy(flat.begin(), flat.end(), p.xyz_matrix.begin());
    } catch (const json::exception &e) {
        throw Error(ErrorCode::Metadata, std::string("malformed profile: ") + e.what());
    }
    const auto &m = p.xyz_matrix;
    const double det = m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) +
                       m[2] * (m[3] * m[7] - m[4] * m[6]);
    if (!std::isfinite(det) || std::abs(det) < 1e-12)
        throw Error(ErrorCode::Metadata, "xyz_matrix must be finite and invertible");
    return p;
}

void save_profile(const CameraColorProfile &p, const std::filesystem::path &path)
{
    const auto &m = p.xyz_matrix;
    json j{{"camera_id", p.camera_id},
           {"xyz_matrix", {{m[0], m[1], m[2]}, {m[3], m[4], m[5]}, {m[6], m[7], m[8]}}}};
    std::ofstream out(path);
    out << j.dump(2) << "\n";
    if (!out)
        throw Error(ErrorCode::Io, "failed writing " + path.string());
}

namespace {

Vec3 unit(const Vec3 &v)
{
    const double n = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
    if (!(n > 0) || !std::isfinite(n))
        throw Error(ErrorCode::DegenerateIlluminant, "illuminant estimate has zero norm");
    return {v[0] / n, v[1] / n, v[2] / n};
}

double lab_f(double t)
{
    constexpr double delta = 6.0 / 29.0;
    if (t > delta * delta * delta)
        return std::cbrt(t);
    return t / (3 * delta * delta) + 4.0 / 29.0;
}

constexpr double kDeg = 180.0 / std::numbers::pi;

} // namespace

Vec3 estimate_illuminant(const PackedImage &img, std::span<const Patch> achromatic_patches)
{
    Vec3 sum{};
    if (!achromatic_patches.empty()) {
        for (const auto &p : achromatic_patches) {
            const Vec3 c = robust_patch_mean(img, p);
            for (int i = 0; i < 3; ++i)
                sum[i] += c[i];
        }
        return unit(sum);
    }
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            const Vec3 c = img.rgb(y, x);
            for (int i = 0; i < 3; ++i)
                sum[i] += c[i];
        }
    return unit(sum);
}

Vec3 xyz_to_lab(const Vec3 &xyz, const Vec3 &white)
{
    const double fx = lab_f(xyz[0] / white[0]);
    const double fy = lab_f(xyz[1] / white[1]);
    const double fz = lab_f(xyz[2] / white[2]);
    return {116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)};
}

LabImage raw_to_lab(const PackedImage &img, const Vec3 &illum, const CameraColorProfile &profile, const Vec3 &white)
{
    if (!(illum[0] > 0 && illum[1] > 0 && illum[2] > 0))
        throw Error(ErrorCode::DegenerateIlluminant, "illuminant components must be positive");
    const double peak = std::max({illum[0], illum[1], illum[2]});
    const Vec3 gain{peak / illum[0], peak / illum[1], peak / illum[2]};

    LabImage out;
    out.height = img.height;
    out.width = img.width;
    out.pixels.resize(img.pixel_count());
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            Vec3 rgb = img.rgb(y, x);
            for (int c = 0; c < 3; ++c)
                rgb[c] *= gain[c];
            out.pixels[static_cast<std::size_t>(y) * img.width + x] = xyz_to_lab(profile.apply(rgb), white);
        }
    return out;
}

double ciede2000(const Vec3 &lab1, const Vec3 &lab2)
{
    const double L1 = lab1[0], a1 = lab1[1], b1 = lab1[2];
    const double L2 = lab2[0], a2 = lab2[1], b2 = lab2[2];

    const double c1 = std::hypot(a1, b1);
    const double c2 = std::hypot(a2, b2);
    const double c_bar = 0.5 * (c1 + c2);
    const double c_bar7 = std::pow(c_bar, 7);
    const double g = 0.5 * (1 - std::sqrt(c_bar7 / (c_bar7 + std::pow(25.0, 7))));
    const double a1p = (1 + g) * a1;
    const double a2p = (1 + g) * a2;
    const double c1p = std::hypot(a1p, b1);
    const double c2p = std::hypot(a2p, b2);

    auto hue = [](double b, double a) {
        if (a == 0 && b == 0)
            return 0.0;
        double h = std::atan2(b, a) * kDeg;
        return h < 0 ? h + 360.0 : h;
    };
    const double h1p = hue(b1, a1p);
    const double h2p = hue(b2, a2p);

    // Hue differences of exactly 180 degrees are common in test data and
    // atan2 rounding decides the branch; treat them as within range.
    constexpr double eps = 1e-9;
    const double dLp = L2 - L1;
    const double dCp = c2p - c1p;
    double dhp = 0;
    if (c1p * c2p != 0) {
        const double diff = h2p - h1p;
        if (std::abs(diff) <= 180.0 + eps)
            dhp = diff;
        else if (diff > 180.0)
            dhp = diff - 360.0;
        else
            dhp = diff + 360.0;
    }
    const double dHp = 2 * std::sqrt(c1p * c2p) * std::sin(dhp / (2 * kDeg));

    const double Lp_bar = 0.5 * (L1 + L2);
    const double Cp_bar = 0.5 * (c1p + c2p);
    double hp_bar = h1p + h2p;
    if (c1p * c2p != 0) {
        if (std::abs(h1p - h2p) <= 180.0 + eps)
            hp_bar = 0.5 * (h1p + h2p);
        else if (h1p + h2p < 360.0)
            hp_bar = 0.5 * (h1p + h2p + 360.0);
        else
            hp_bar = 0.5 * (h1p + h2p - 360.0);
    }

    const double t = 1 - 0.17 * std::cos((hp_bar - 30) / kDeg) + 0.24 * std::cos(2 * hp_bar / kDeg) +
                     0.32 * std::cos((3 * hp_bar + 6) / kDeg) - 0.20 * std::cos((4 * hp_bar - 63) / kDeg);
    const double d_theta = 30 * std::exp(-std::pow((hp_bar - 275) / 25, 2));
    const double cp_bar7 = std::pow(Cp_bar, 7);
    const double rc = 2 * std::sqrt(cp_bar7 / (cp_bar7 + std::pow(25.0, 7)));
    const double l50 = (Lp_bar - 50) * (Lp_bar - 50);
    const double sl = 1 + 0.015 * l50 / std::sqrt(20 + l50);
    const double sc = 1 + 0.045 * Cp_bar;
    const double sh = 1 + 0.015 * Cp_bar * t;
    const double rt = -std::sin(2 * d_theta / kDeg) * rc;

    const double tl = dLp / sl;
    const double tc = dCp / sc;
    const double th = dHp / sh;
    return std::sqrt(tl * tl + tc * tc + th * th + rt * tc * th);
}

double delta_e_2000(const LabImage &a, const LabImage &b)
{
    if (a.height != b.height || a.width != b.width || a.pixels.empty())
        throw Error(ErrorCode::Shape, "Lab images must have equal, non-empty shapes");
    double sum = 0;
    for (std::size_t i = 0; i < a.pixels.size(); ++i)
        sum += ciede2000(a.pixels[i], b.pixels[i]);
    return sum / static_cast<double>(a.pixels.size());
}

} // namespace raw2raw::eval
