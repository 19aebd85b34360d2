// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the raw2raw Project.

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "raw2raw/error.hpp"
#include "raw2raw/evalkit.hpp"
#include "raw2raw/synthcam.hpp"
#include "test_support.hpp"

using namespace raw2raw;
using namespace raw2raw::eval;

namespace {

// Sharma, Wu and Dalal CIEDE2000 test data: Lab1, Lab2, expected difference.
struct SharmaPair
{
    double l1, a1, b1, l2, a2, b2, de;
};

constexpr SharmaPair kSharma[] = {
    {50.0000, 2.6772, -79.7751, 50.0000, 0.0000, -82.7485, 2.0425},
    {50.0000, 3.1571, -77.2803, 50.0000, 0.0000, -82.7485, 2.8615},
    {50.0000, 2.8361, -74.0200, 50.0000, 0.0000, -82.7485, 3.4412},
    {50.0000, -1.3802, -84.2814, 50.0000, 0.0000, -82.7485, 1.0000},
    {50.0000, -1.1848, -84.8006, 50.0000, 0.0000, -82.7485, 1.0000},
    {50.0000, -0.9009, -85.5211, 50.0000, 0.0000, -82.7485, 1.0000},
    {50.0000, 0.0000, 0.0000, 50.0000, -1.0000, 2.0000, 2.3669},
    {50.0000, -1.0000, 2.0000, 50.0000, 0.0000, 0.0000, 2.3669},
    {50.0000, 2.4900, -0.0010, 50.0000, -2.4900, 0.0009, 7.1792},
    {50.0000, 2.4900, -0.0010, 50.0000, -2.4900, 0.0010, 7.1792},
    {50.0000, 2.4900, -0.0010, 50.0000, -2.4900, 0.0011, 7.2195},
    {50.0000, 2.4900, -0.0010, 50.0000, -2.4900, 0.0012, 7.2195},
    {50.0000, -0.0010, 2.4900, 50.0000, 0.0009, -2.4900, 4.8045},
    {50.0000, -0.0010, 2.4900, 50.0000, 0.0010, -2.4900, 4.8045},
    {50.0000, -0.0010, 2.4900, 50.0000, 0.0011, -2.4900, 4.7461},
    {50.0000, 2.5000, 0.0000, 50.0000, 0.0000, -2.5000, 4.3065},
    {50.0000, 2.5000, 0.0000, 73.0000, 25.0000, -18.0000, 27.1492},
    {50.0000, 2.5000, 0.0000, 61.0000, -5.0000, 29.0000, 22.8977},
    {50.0000, 2.5000, 0.0000, 56.0000, -27.0000, -3.0000, 31.9030},
    {50.0000, 2.5000, 0.0000, 58.0000, 24.0000, 15.0000, 19.4535},
    {50.0000, 2.5000, 0.0000, 50.0000, 3.1736, 0.5854, 1.0000},
    {50.0000, 2.5000, 0.0000, 50.0000, 3.2972, 0.0000, 1.0000},
    {50.0000, 2.5000, 0.0000, 50.0000, 1.8634, 0.5757, 1.0000},
    {50.0000, 2.5000, 0.0000, 50.0000, 3.2592, 0.3350, 1.0000},
    {60.2574, -34.0099, 36.2677, 60.4626, -34.1751, 39.4387, 1.2644},
    {63.0109, -31.0961, -5.8663, 62.8187, -29.7946, -4.0864, 1.2630},
    {61.2901, 3.7196, -5.3901, 61.4292, 2.2480, -4.9620, 1.8731},
    {35.0831, -44.1164, 3.7933, 35.0232, -40.0716, 1.5901, 1.8645},
    {22.7233, 20.0904, -46.6940, 23.0331, 14.9730, -42.5619, 2.0373},
    {36.4612, 47.8580, 18.3852, 36.2715, 50.5065, 21.2231, 1.4146},
    {90.8027, -2.0831, 1.4410, 91.1528, -1.6435, 0.0447, 1.4441},
    {90.9257, -0.5406, -0.9208, 88.6381, -0.8985, -0.7239, 1.5381},
    {6.7747, -0.2908, -2.4247, 5.8714, -0.0985, -2.2286, 0.6377},
    {2.0776, 0.0795, -1.1350, 0.9033, -0.0636, -0.5514, 0.9082},
};

ErrorCode code_of(const std::function<void()> &fn)
{
    try {
        fn();
    } catch (const Error &e) {
        return e.code();
    }
    ADD_FAILURE() << "no error thrown";
    return ErrorCode::Io;
}

double mse_oracle(const PackedImage &x, const PackedImage &y)
{
    long double s = 0;
    for (std::size_t i = 0; i < x.data.size(); ++i) {
        const long double d = static_cast<long double>(x.data[i]) - y.data[i];
        s += d * d;
    }
    return static_cast<double>(s / x.data.size());
}

// Direct scalar Lab conversion with the CIE constants.
Vec3 lab_oracle(const Vec3 &rgb, const Vec3 &illum, const std::array<double, 9> &m)
{
    const double peak = std::max({illum[0], illum[1], illum[2]});
    double wb[3];
    for (int c = 0; c < 3; ++c)
        wb[c] = rgb[c] / (illum[c] / peak);
    double xyz[3];
    for (int r = 0; r < 3; ++r)
        xyz[r] = m[3 * r] * wb[0] + m[3 * r + 1] * wb[1] + m[3 * r + 2] * wb[2];
    const double white[3] = {0.95047, 1.0, 1.08883};
    auto f = [](double t) {
        const double eps = 216.0 / 24389.0, kappa = 24389.0 / 27.0;
        return t > eps ? std::cbrt(t) : (kappa * t + 16.0) / 116.0;
    };
    const double fx = f(xyz[0] / white[0]), fy = f(xyz[1] / white[1]), fz = f(xyz[2] / white[2]);
    return {116 * fy - 16, 500 * (fx - fy), 200 * (fy - fz)};
}

CameraColorProfile white_profile()
{
    // Diagonal matrix taking (1,1,1) to the D65 white.
    CameraColorProfile p;
    p.xyz_matrix = {0.95047, 0, 0, 0, 1.0, 0, 0, 0, 1.08883};
    p.camera_id = "diag";
    return p;
}

} // namespace

TEST(Psnr, IdenticalIsInfinite)
{
    std::mt19937_64 rng(1);
    const PackedImage x = test::random_image(rng, 8, 8, 4);
    EXPECT_EQ(psnr(x, x), kPsnrInfinity);
}

TEST(Psnr, ConstantDifference)
{
    PackedImage x(6, 5, 3, 0.2f), y(6, 5, 3, 0.3f);
    EXPECT_NEAR(psnr(x, y), 20.0, 1e-5);
}

TEST(Psnr, MatchesScalarOracle)
{
    std::mt19937_64 rng(2);
    for (int t = 0; t < 20; ++t) {
        const PackedImage x = test::random_image(rng, 13, 7, 4), y = test::random_image(rng, 13, 7, 4);
        EXPECT_NEAR(psnr(x, y), 10.0 * std::log10(1.0 / mse_oracle(x, y)), 1e-9);
    }
}

TEST(Psnr, StrictlyDecreasesWithNestedPerturbations)
{
    std::mt19937_64 rng(3);
    const PackedImage x = test::random_image(rng, 16, 16, 3, 0.2f, 0.8f);
    PackedImage y = x;
    double prev = kPsnrInfinity;
    std::uniform_int_distribution<std::size_t> pick(0, x.data.size() - 1);
    for (int step = 0; step < 30; ++step) {
        y.data[pick(rng)] += 0.05f;
        const double p = psnr(x, y);
        EXPECT_LT(p, prev);
        prev = p;
    }
}

TEST(Psnr, ShapeMismatch)
{
    EXPECT_EQ(code_of([] { psnr(PackedImage(2, 2, 3), PackedImage(2, 3, 3)); }), ErrorCode::Shape);
}

TEST(Mae, Examples)
{
    PackedImage x(4, 4, 3, 0.5f), y(4, 4, 3, 0.6f);
    EXPECT_EQ(mae(x, x), 0.0);
    EXPECT_NEAR(mae(x, y), 0.1, 1e-7);
}

TEST(Mae, MatchesScalarOracle)
{
    std::mt19937_64 rng(4);
    for (int t = 0; t < 20; ++t) {
        const PackedImage x = test::random_image(rng, 9, 11, 4), y = test::random_image(rng, 9, 11, 4);
        long double s = 0;
        for (std::size_t i = 0; i < x.data.size(); ++i)
            s += std::fabs(static_cast<long double>(x.data[i]) - y.data[i]);
        EXPECT_NEAR(mae(x, y), static_cast<double>(s / x.data.size()), 1e-12);
    }
}

TEST(Ssim, SelfSimilarityIsOne)
{
    std::mt19937_64 rng(5);
    const PackedImage x = test::random_image(rng, 24, 24, 4);
    EXPECT_NEAR(ssim(x, x), 1.0, 1e-12);
}

TEST(Ssim, InvertedImageIsDissimilar)
{
    std::mt19937_64 rng(6);
    const PackedImage x = test::random_image(rng, 24, 24, 3);
    PackedImage y = x;
    for (auto &v : y.data)
        v = 1.0f - v;
    EXPECT_LT(ssim(x, y), 1.0);
}

TEST(Ssim, ConstantImagesClosedForm)
{
    for (double a : {0.0, 0.1, 0.25, 0.4}) {
        const double b = a + 0.5;
        PackedImage x(20, 20, 3, static_cast<float>(a)), y(20, 20, 3, static_cast<float>(b));
        const double c1 = 0.01 * 0.01;
        // Both variances and the covariance vanish, so the contrast term is C2/C2.
        const double expected = (2 * a * b + c1) / (a * a + b * b + c1);
        EXPECT_NEAR(ssim(x, y), expected, 1e-6) << a;
    }
}

TEST(Ssim, BoundedOnRandomInputs)
{
    std::mt19937_64 rng(7);
    for (int t = 0; t < 10; ++t) {
        const PackedImage x = test::random_image(rng, 16, 16, 3), y = test::random_image(rng, 16, 16, 3);
        const double s = ssim(x, y);
        EXPECT_LE(std::fabs(s), 1.0);
    }
}

TEST(Illuminant, GrayWorldOnTintedNeutralScene)
{
    const Vec3 e{2 / std::sqrt(6.0), 1 / std::sqrt(6.0), 1 / std::sqrt(6.0)};
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(0.1, 0.9);
    PackedImage img(10, 10, 3);
    for (int y = 0; y < 10; ++y)
        for (int x = 0; x < 10; ++x) {
            const double g = u(rng);
            for (int c = 0; c < 3; ++c)
                img.at(y, x, c) = static_cast<float>(0.4 * g * e[c]);
        }
    const Vec3 est = estimate_illuminant(img);
    for (int c = 0; c < 3; ++c)
        EXPECT_NEAR(est[c], e[c], 1e-6);
}

TEST(Illuminant, NeutralAchromaticPatches)
{
    PackedImage img(12, 12, 4, 0.9f);
    for (int y = 2; y < 6; ++y)
        for (int x = 2; x < 6; ++x)
            for (int c = 0; c < 4; ++c)
                img.at(y, x, c) = 0.4f;
    img.at(0, 0, 0) = 0.0f; // outside the patch
    const std::vector<Patch> patches{{2, 2, 4}};
    const Vec3 est = estimate_illuminant(img, patches);
    for (int c = 0; c < 3; ++c)
        EXPECT_NEAR(est[c], 1 / std::sqrt(3.0), 1e-7);
}

TEST(Illuminant, ZeroImageIsDegenerate)
{
    EXPECT_EQ(code_of([] { estimate_illuminant(PackedImage(4, 4, 3, 0.0f)); }), ErrorCode::DegenerateIlluminant);
}

TEST(Illuminant, SynthcamFlatReflectanceWithinTwoDegrees)
{
    const auto sensor = synth::reference_sensor();
    const auto grid = synth::default_grid();
    std::mt19937_64 rng(9);
    for (int t = 0; t < 5; ++t) {
        synth::SpectralScene scene;
        scene.height = scene.width = 8;
        scene.wavelengths = grid;
        scene.illuminant = synth::random_illuminant(rng, grid);
        scene.reflectance.assign(64 * grid.size(), 0.5);
        const auto img = synth::render(scene, sensor).image;
        const Vec3 truth = synth::illuminant_response(scene, sensor);
        const Vec3 est = estimate_illuminant(img);
        const double n = std::sqrt(truth[0] * truth[0] + truth[1] * truth[1] + truth[2] * truth[2]);
        double dot = 0;
        for (int c = 0; c < 3; ++c)
            dot += est[c] * truth[c] / n;
        const double angle = std::acos(std::min(1.0, dot)) * 180.0 / M_PI;
        EXPECT_LT(angle, 2.0);
    }
}

TEST(RawToLab, IlluminantDirectionIsNeutral)
{
    const Vec3 illum{0.3, 0.6, 0.45};
    PackedImage img(1, 1, 3);
    for (int c = 0; c < 3; ++c)
        img.at(0, 0, c) = static_cast<float>(illum[c] * 0.8);
    const LabImage lab = raw_to_lab(img, illum, white_profile());
    EXPECT_NEAR(lab.pixels[0][1], 0.0, 1e-5);
    EXPECT_NEAR(lab.pixels[0][2], 0.0, 1e-5);
}

TEST(RawToLab, BlackIsZeroLightness)
{
    const LabImage lab = raw_to_lab(PackedImage(2, 2, 4, 0.0f), {1, 1, 1}, white_profile());
    for (const auto &p : lab.pixels)
        EXPECT_NEAR(p[0], 0.0, 1e-12);
}

TEST(RawToLab, MatchesScalarOracle)
{
    std::mt19937_64 rng(10);
    CameraColorProfile prof;
    prof.xyz_matrix = {0.41, 0.36, 0.18, 0.21, 0.72, 0.07, 0.02, 0.12, 0.95};
    const Vec3 illum{0.5, 0.8, 0.33};
    const PackedImage img = test::random_image(rng, 6, 6, 4);
    const LabImage lab = raw_to_lab(img, illum, prof);
    for (int y = 0; y < 6; ++y)
        for (int x = 0; x < 6; ++x) {
            const Vec3 rgb{img.at(y, x, 0), 0.5 * (double(img.at(y, x, 1)) + img.at(y, x, 2)), img.at(y, x, 3)};
            const Vec3 ref = lab_oracle(rgb, illum, prof.xyz_matrix);
            for (int c = 0; c < 3; ++c)
                EXPECT_NEAR(lab.pixels[y * 6 + x][c], ref[c], 1e-9);
        }
}

TEST(RawToLab, ZeroIlluminantComponent)
{
    EXPECT_EQ(code_of([] { raw_to_lab(PackedImage(1, 1, 3, 0.5f), {1, 0, 1}, white_profile()); }),
              ErrorCode::DegenerateIlluminant);
}

TEST(Ciede2000, SharmaReferencePairs)
{
    for (const auto &p : kSharma) {
        EXPECT_NEAR(ciede2000({p.l1, p.a1, p.b1}, {p.l2, p.a2, p.b2}), p.de, 1e-4)
            << p.l1 << "," << p.a1 << "," << p.b1 << " vs " << p.l2 << "," << p.a2 << "," << p.b2;
    }
}

TEST(Ciede2000, SymmetricAndZeroOnlyForIdentical)
{
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> L(0, 100), ab(-100, 100);
    for (int t = 0; t < 1000; ++t) {
        const Vec3 x{L(rng), ab(rng), ab(rng)}, y{L(rng), ab(rng), ab(rng)};
        EXPECT_NEAR(ciede2000(x, y), ciede2000(y, x), 1e-9);
        EXPECT_EQ(ciede2000(x, x), 0.0);
        EXPECT_GT(ciede2000(x, y), 0.0);
    }
}

TEST(Ciede2000, MeanOverImage)
{
    LabImage a, b;
    a.height = b.height = 1;
    a.width = b.width = 2;
    a.pixels = {{50, 2.6772, -79.7751}, {50, 0, 0}};
    b.pixels = {{50, 0, -82.7485}, {50, -1, 2}};
    EXPECT_NEAR(delta_e_2000(a, b), (2.0425 + 2.3669) / 2, 1e-4);
    EXPECT_EQ(delta_e_2000(a, a), 0.0);
}

TEST(Report, IdenticalPairRow)
{
    std::mt19937_64 rng(12);
    const PackedImage x = test::random_image(rng, 16, 16, 4, 0.1f, 0.9f);
    EvalItem item{"same", x, x, Vec3{0.5, 0.7, 0.4}, {}};
    const MetricRow row = evaluate_pair(item, white_profile(), IlluminantPolicy::SharedGroundTruth);
    EXPECT_EQ(row.psnr, kPsnrInfinity);
    EXPECT_NEAR(row.ssim, 1.0, 1e-12);
    EXPECT_EQ(row.mae, 0.0);
    EXPECT_EQ(row.delta_e, 0.0);

    const std::vector<EvalItem> items{item};
    const MetricsReport r = evaluate(items, white_profile(), IlluminantPolicy::SharedGroundTruth, "id", "A2B");
    EXPECT_NE(r.to_csv().find("id,A2B,same,99.000000,1.000000,0.000000,0.000000"), std::string::npos);
    EXPECT_NE(r.to_table().find("inf"), std::string::npos);
}

TEST(Report, HeaderColumnsAndArrows)
{
    MetricsReport r;
    r.method = "m";
    r.direction = "A2B";
    r.rows = {{"a", 30, 0.9, 0.02, 3}, {"b", 20, 0.8, 0.04, 5}};
    aggregate(r);
    const std::string t = r.to_table();
    const auto p = t.find("PSNR↑"), s = t.find("SSIM↑"), m = t.find("MAE↓"), d = t.find("ΔE↓");
    ASSERT_NE(p, std::string::npos);
    ASSERT_NE(s, std::string::npos);
    ASSERT_NE(m, std::string::npos);
    ASSERT_NE(d, std::string::npos);
    EXPECT_LT(p, s);
    EXPECT_LT(s, m);
    EXPECT_LT(m, d);
    EXPECT_NE(t.find("25.00 ± 7.07"), std::string::npos);
    EXPECT_NE(t.find("K1=0.01 K2=0.03 window=11x11"), std::string::npos);
}

TEST(Report, AggregateMeanAndSampleStd)
{
    MetricsReport r;
    r.rows = {{"a", 26.0, 0.8, 0.04, 8.0}, {"b", 28.0, 0.9, 0.05, 9.0}, {"c", kPsnrInfinity, 1.0, 0.0, 0.0}};
    aggregate(r);
    const double mean = (26.0 + 28.0 + 99.0) / 3;
    EXPECT_NEAR(r.psnr.mean, mean, 1e-12);
    const double var = ((26 - mean) * (26 - mean) + (28 - mean) * (28 - mean) + (99 - mean) * (99 - mean)) / 2;
    EXPECT_NEAR(r.psnr.std, std::sqrt(var), 1e-12);
    EXPECT_NEAR(r.delta_e.mean, 17.0 / 3, 1e-12);

    MetricsReport one;
    one.rows = {{"a", 26.0, 0.8, 0.04, 8.0}};
    aggregate(one);
    EXPECT_EQ(one.psnr.std, 0.0);
}

TEST(Report, PermutationEquivariant)
{
    std::mt19937_64 rng(13);
    std::vector<EvalItem> items;
    for (int i = 0; i < 4; ++i) {
        const PackedImage gt = test::random_image(rng, 12, 12, 3, 0.1f, 0.9f);
        PackedImage mapped = gt;
        for (auto &v : mapped.data)
            v = std::clamp(v + 0.02f * (i + 1), 0.0f, 1.0f);
        items.push_back({"p" + std::to_string(i), mapped, gt, Vec3{0.4, 0.5, 0.6}, {}});
    }
    const auto r1 = evaluate(items, white_profile(), IlluminantPolicy::SharedGroundTruth, "m", "A2B");
    std::vector<EvalItem> shuffled{items[2], items[0], items[3], items[1]};
    const auto r2 = evaluate(shuffled, white_profile(), IlluminantPolicy::SharedGroundTruth, "m", "A2B");
    EXPECT_EQ(r2.rows[0].name, "p2");
    EXPECT_EQ(r2.rows[0].psnr, r1.rows[2].psnr);
    EXPECT_NEAR(r1.psnr.mean, r2.psnr.mean, 1e-12);
    EXPECT_NEAR(r1.psnr.std, r2.psnr.std, 1e-12);
    EXPECT_NEAR(r1.delta_e.mean, r2.delta_e.mean, 1e-12);
    EXPECT_NEAR(r1.ssim.std, r2.ssim.std, 1e-12);
}

TEST(Profile, SaveLoadRoundTrip)
{
    const auto dir = test::scratch_dir("evalkit_profile");
    CameraColorProfile p;
    p.xyz_matrix = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 1.9};
    p.camera_id = "cam";
    save_profile(p, dir / "p.json");
    const auto q = load_profile(dir / "p.json");
    EXPECT_EQ(q.xyz_matrix, p.xyz_matrix);
    EXPECT_EQ(q.camera_id, "cam");
}
