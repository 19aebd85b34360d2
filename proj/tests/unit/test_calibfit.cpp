// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the raw2raw Project.

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "raw2raw/calibfit.hpp"
#include "raw2raw/error.hpp"
#include "raw2raw/evalkit.hpp"
#include "raw2raw/synthcam.hpp"
#include "test_support.hpp"

using namespace raw2raw;
using namespace raw2raw::calib;

namespace {

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

Vec3 random_color(std::mt19937_64 &rng, double lo = 0.0, double hi = 1.0)
{
    std::uniform_real_distribution<double> u(lo, hi);
    return {u(rng), u(rng), u(rng)};
}

// Written out term by term, independently of expand_kernel.
Vec3 poly11_apply(const std::vector<double> &m, const Vec3 &c)
{
    const double r = c[0], g = c[1], b = c[2];
    const double phi[11] = {r, g, b, r * g, r * b, g * b, r * r, g * g, b * b, r * g * b, 1.0};
    Vec3 out{};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 11; ++j)
            out[i] += m[11 * i + j] * phi[j];
    return out;
}

std::vector<ColorSamplePair> samples_from(const std::vector<Vec3> &src, const std::vector<Vec3> &dst)
{
    std::vector<ColorSamplePair> s;
    for (std::size_t i = 0; i < src.size(); ++i)
        s.push_back({src[i], dst[i]});
    return s;
}

/// Random generator matrix and 40 noiseless samples with dst in [0,1].
std::pair<std::vector<double>, std::vector<ColorSamplePair>> poly_problem(std::mt19937_64 &rng)
{
    std::normal_distribution<double> n(0.0, 0.1);
    std::vector<double> m(33);
    for (auto &v : m)
        v = n(rng);
    for (int i = 0; i < 3; ++i) {
        m[11 * i + i] += 0.6;
        m[11 * i + 10] += 0.2;
    }
    std::vector<ColorSamplePair> s;
    while (s.size() < 40) {
        const Vec3 src = random_color(rng);
        const Vec3 dst = poly11_apply(m, src);
        if (std::all_of(dst.begin(), dst.end(), [](double v) { return v >= 0 && v <= 1; }))
            s.push_back({src, dst});
    }
    return {m, s};
}

PackedImage fill_patch(PackedImage img, const Patch &p, const Vec3 &c)
{
    for (int y = p.y; y < p.y + p.size; ++y)
        for (int x = p.x; x < p.x + p.size; ++x)
            for (int ch = 0; ch < 3; ++ch)
                img.at(y, x, ch) = static_cast<float>(c[ch]);
    return img;
}

double rms(const PackedImage &a, const PackedImage &b)
{
    double s = 0;
    for (std::size_t i = 0; i < a.data.size(); ++i)
        s += (double(a.data[i]) - b.data[i]) * (double(a.data[i]) - b.data[i]);
    return std::sqrt(s / a.data.size());
}

} // namespace

TEST(Kernel, Examples)
{
    const auto z = expand_kernel({0, 0, 0}, Kernel::Poly11);
    ASSERT_EQ(z.size(), 11u);
    for (int i = 0; i < 10; ++i)
        EXPECT_EQ(z[i], 0.0);
    EXPECT_EQ(z[10], 1.0);
    for (double v : expand_kernel({1, 1, 1}, Kernel::Poly11))
        EXPECT_EQ(v, 1.0);
    EXPECT_EQ(expand_kernel({0.5, 0, 0}, Kernel::Identity), (std::vector<double>{0.5, 0, 0}));
    const auto p = expand_kernel({2, 3, 5}, Kernel::Poly11);
    EXPECT_EQ(p, (std::vector<double>{2, 3, 5, 6, 10, 15, 4, 9, 25, 30, 1}));
}

TEST(FitMap, IdentityData)
{
    std::mt19937_64 rng(1);
    std::vector<Vec3> src;
    for (int i = 0; i < 30; ++i)
        src.push_back(random_color(rng));
    const CalibrationMap m = fit_map(samples_from(src, src), Kernel::Identity);
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c)
            EXPECT_NEAR(m.m[3 * r + c], r == c ? 1.0 : 0.0, 1e-10);
    EXPECT_NEAR(m.fit_residual_rms, 0.0, 1e-10);
}

TEST(FitMap, ScalarMap)
{
    std::mt19937_64 rng(2);
    std::vector<Vec3> src, dst;
    for (int i = 0; i < 30; ++i) {
        src.push_back(random_color(rng, 0, 0.5));
        dst.push_back({2 * src.back()[0], 2 * src.back()[1], 2 * src.back()[2]});
    }
    const CalibrationMap m = fit_map(samples_from(src, dst), Kernel::Identity);
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c)
            EXPECT_NEAR(m.m[3 * r + c], r == c ? 2.0 : 0.0, 1e-10);
}

TEST(FitMap, RecoversGeneratingPoly11Matrix)
{
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        const auto [m0, samples] = poly_problem(rng);
        const CalibrationMap m = fit_map(samples, Kernel::Poly11);
        double err = 0;
        for (int i = 0; i < 33; ++i)
            err = std::max(err, std::abs(m.m[i] - m0[i]));
        EXPECT_LT(err, 1e-6) << "trial " << trial;
        EXPECT_LT(m.fit_residual_rms, 1e-9);
    }
}

TEST(FitMap, TooFewSamplesIsSingular)
{
    std::mt19937_64 rng(4);
    auto [m0, samples] = poly_problem(rng);
    samples.resize(10);
    EXPECT_EQ(code_of([&] { fit_map(samples, Kernel::Poly11); }), ErrorCode::SingularFit);
}

TEST(FitMap, RankDeficientDesignIsSingular)
{
    // Gray samples make R, G and B collinear.
    std::vector<ColorSamplePair> s;
    for (int i = 0; i < 20; ++i) {
        const double v = i / 20.0;
        s.push_back({{v, v, v}, {v, v, v}});
    }
    try {
        fit_map(s, Kernel::Poly11);
        FAIL() << "expected a singular fit";
    } catch (const Error &e) {
        EXPECT_EQ(e.code(), ErrorCode::SingularFit);
        EXPECT_NE(std::string(e.what()).find("rank"), std::string::npos);
    }
}

TEST(FitMap, OrderInvariantBitwise)
{
    std::mt19937_64 rng(5);
    std::vector<ColorSamplePair> s;
    for (int i = 0; i < 40; ++i)
        s.push_back({random_color(rng), random_color(rng), SampleOrigin::Chart, 0.5 + (i % 3)});
    const CalibrationMap a = fit_map(s, Kernel::Poly11);
    for (int t = 0; t < 5; ++t) {
        std::shuffle(s.begin(), s.end(), rng);
        const CalibrationMap b = fit_map(s, Kernel::Poly11);
        EXPECT_EQ(a.m, b.m);
        EXPECT_EQ(a.fit_residual_rms, b.fit_residual_rms);
    }
}

TEST(FitMap, WeightsActAsRepetition)
{
    std::mt19937_64 rng(6);
    std::vector<ColorSamplePair> weighted, repeated;
    for (int i = 0; i < 25; ++i) {
        const ColorSamplePair p{random_color(rng), random_color(rng)};
        const int w = 1 + i % 3;
        weighted.push_back({p.src, p.dst, SampleOrigin::Chart, double(w)});
        for (int k = 0; k < w; ++k)
            repeated.push_back(p);
    }
    const auto a = fit_map(weighted, Kernel::Poly11), b = fit_map(repeated, Kernel::Poly11);
    for (int i = 0; i < 33; ++i)
        EXPECT_NEAR(a.m[i], b.m[i], 1e-9);
    EXPECT_NEAR(a.fit_residual_rms, b.fit_residual_rms, 1e-12);
}

TEST(FitMap, DuplicatingLowResidualSampleNeverRaisesRms)
{
    // The previous optimum stays feasible, so duplicating a sample whose
    // residual is at most the current RMS cannot raise it.
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<ColorSamplePair> s;
        for (int i = 0; i < 30; ++i)
            s.push_back({random_color(rng), random_color(rng)});
        const CalibrationMap m = fit_map(s, Kernel::Poly11);
        std::size_t best = 0;
        double best_r = 1e300;
        for (std::size_t i = 0; i < s.size(); ++i) {
            const Vec3 p = m.apply(s[i].src);
            double r = 0;
            for (int c = 0; c < 3; ++c)
                r += (p[c] - s[i].dst[c]) * (p[c] - s[i].dst[c]);
            if (r < best_r)
                best_r = r, best = i;
        }
        s.push_back(s[best]);
        EXPECT_LE(fit_map(s, Kernel::Poly11).fit_residual_rms, m.fit_residual_rms + 1e-9);
    }
}

TEST(FitMap, DuplicatingWholeSetKeepsRms)
{
    std::mt19937_64 rng(8);
    std::vector<ColorSamplePair> s;
    for (int i = 0; i < 30; ++i)
        s.push_back({random_color(rng), random_color(rng)});
    const double rms1 = fit_map(s, Kernel::Poly11).fit_residual_rms;
    const auto copy = s;
    s.insert(s.end(), copy.begin(), copy.end());
    EXPECT_NEAR(fit_map(s, Kernel::Poly11).fit_residual_rms, rms1, 1e-9);
}

TEST(FitMap, RejectsOutOfRangeSamples)
{
    std::vector<ColorSamplePair> s(12, {{0.5, 0.5, 1.2}, {0.5, 0.5, 0.5}});
    EXPECT_EQ(code_of([&] { fit_map(s, Kernel::Identity); }), ErrorCode::Config);
}

TEST(ApplyMap, IdentityIsIdentity)
{
    std::mt19937_64 rng(9);
    const PackedImage img = test::random_image(rng, 9, 7, 3);
    const MappedImage out = apply_map(img, CalibrationMap::identity());
    EXPECT_EQ(out.image.data, img.data);
    EXPECT_EQ(out.out_of_gamut_fraction, 0.0);
}

TEST(ApplyMap, ConstantImage)
{
    std::mt19937_64 rng(10);
    const auto [m0, samples] = poly_problem(rng);
    CalibrationMap map;
    map.kernel = Kernel::Poly11;
    map.m = m0;
    const Vec3 c{0.3, 0.6, 0.2};
    PackedImage img(4, 5, 3);
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 5; ++x)
            for (int k = 0; k < 3; ++k)
                img.at(y, x, k) = static_cast<float>(c[k]);
    const Vec3 expected = poly11_apply(m0, {img.at(0, 0, 0), img.at(0, 0, 1), img.at(0, 0, 2)});
    const MappedImage mapped = apply_map(img, map);
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 5; ++x)
            for (int k = 0; k < 3; ++k)
                EXPECT_NEAR(mapped.image.at(y, x, k), std::clamp(expected[k], 0.0, 1.0), 1e-6);
}

TEST(ApplyMap, FourChannelAveragesAndDuplicatesGreen)
{
    CalibrationMap map;
    map.kernel = Kernel::Identity;
    map.m = {0, 1, 0, 1, 0, 0, 0, 0, 1}; // swap R and G
    PackedImage img(1, 1, 4);
    img.data = {0.1f, 0.4f, 0.6f, 0.9f};
    const MappedImage out = apply_map(img, map);
    EXPECT_FLOAT_EQ(out.image.at(0, 0, 0), 0.5f);
    EXPECT_FLOAT_EQ(out.image.at(0, 0, 1), 0.1f);
    EXPECT_FLOAT_EQ(out.image.at(0, 0, 2), 0.1f);
    EXPECT_FLOAT_EQ(out.image.at(0, 0, 3), 0.9f);
}

TEST(ApplyMap, OutOfGamutFractionCountsValues)
{
    CalibrationMap map;
    map.kernel = Kernel::Identity;
    map.m = {2, 0, 0, 0, 1, 0, 0, 0, 1};
    PackedImage img(1, 2, 3);
    img.data = {0.7f, 0.2f, 0.2f, 0.3f, 0.2f, 0.2f};
    const MappedImage out = apply_map(img, map);
    EXPECT_NEAR(out.out_of_gamut_fraction, 1.0 / 6.0, 1e-12);
    EXPECT_EQ(out.image.at(0, 0, 0), 1.0f);
}

TEST(ApplyMap, KernelMatrixMismatchIsShapeError)
{
    CalibrationMap map;
    map.kernel = Kernel::Poly11;
    map.m.assign(9, 0.0);
    EXPECT_EQ(code_of([&] { apply_map(PackedImage(2, 2, 3), map); }), ErrorCode::Shape);
}

TEST(ApplyMap, LinearSensorPairBelowHalfDeltaE)
{
    synth::DatasetOptions opt;
    opt.n_unpaired = 0;
    opt.n_anchor = 1;
    opt.n_test = 3;
    opt.seed = 11;
    const auto sa = synth::reference_sensor(), sb = synth::linear_partner_sensor();
    const auto ds = synth::generate_dataset(opt, sa, sb);
    const auto &anchor = ds.anchors[0];
    AnnotationRecord rec;
    rec.chart_a = rec.chart_b = anchor.layout.chart;
    const auto samples = annotation_samples(anchor.a_chart, anchor.b_chart, rec);
    const CalibrationMap map = fit_map(samples, Kernel::Poly11);
    const auto profile = synth::derive_profile(sb, "B");
    for (const auto &t : ds.tests) {
        const PackedImage mapped = apply_map(t.a_free, map).image;
        const Vec3 illum = eval::estimate_illuminant(t.b_free, t.layout.achromatic);
        const double de = eval::delta_e_2000(eval::raw_to_lab(mapped, illum, profile),
                                             eval::raw_to_lab(t.b_free, illum, profile));
        EXPECT_LT(de, 0.5) << t.scene_id;
    }
}

TEST(ChartColors, UniformOutlierAndEmpty)
{
    PackedImage img(10, 10, 3, 0.25f);
    const Patch p{1, 1, 8};
    EXPECT_NEAR(extract_chart_colors(img, std::span<const Patch>(&p, 1))[0][1], 0.25, 1e-7);

    img.at(3, 4, 0) = 1.0f;
    img.at(3, 4, 1) = 0.0f;
    const Vec3 c = extract_chart_colors(img, std::span<const Patch>(&p, 1))[0];
    for (int k = 0; k < 3; ++k)
        EXPECT_NEAR(c[k], 0.25, 1e-7);

    EXPECT_TRUE(extract_chart_colors(img, std::span<const Patch>()).empty());
    const Patch outside{5, 5, 8};
    EXPECT_EQ(code_of([&] { extract_chart_colors(img, std::span<const Patch>(&outside, 1)); }), ErrorCode::Bounds);
    const Patch tiny{0, 0, 1};
    EXPECT_EQ(code_of([&] { extract_chart_colors(img, std::span<const Patch>(&tiny, 1)); }), ErrorCode::Bounds);
}

TEST(AnchorPair, IdenticalFramesGiveIdentity)
{
    std::mt19937_64 rng(12);
    PackedImage chart(64, 64, 3, 0.5f);
    AnnotationRecord rec;
    for (int i = 0; i < 24; ++i) {
        const Patch p{(i % 6) * 10 + 1, (i / 6) * 10 + 1, 8};
        chart = fill_patch(chart, p, random_color(rng, 0.05, 0.95));
        rec.chart_a.push_back({p, std::to_string(i)});
    }
    rec.chart_b = rec.chart_a;
    const PackedImage free_img = test::random_image(rng, 32, 32, 3, 0.1f, 0.9f);
    const AnchorBuild b = build_anchor_pair(chart, free_img, chart, free_img, rec);
    for (int r = 0; r < 3; ++r)
        for (int j = 0; j < 11; ++j)
            EXPECT_NEAR(b.map_ab.m[11 * r + j], r == j ? 1.0 : 0.0, 1e-6);
    for (std::size_t i = 0; i < free_img.data.size(); ++i) {
        EXPECT_NEAR(b.a_to_b.image_b.data[i], free_img.data[i], 1e-6);
        EXPECT_NEAR(b.b_to_a.image_a.data[i], free_img.data[i], 1e-6);
    }
    EXPECT_EQ(b.a_to_b.image_a.data, free_img.data);
    EXPECT_EQ(b.b_to_a.image_b.data, free_img.data);
}

TEST(AnchorPair, ExtraRegionsReduceResidualOnNonlinearScene)
{
    synth::DatasetOptions opt;
    opt.n_unpaired = 0;
    opt.n_anchor = 3;
    opt.n_test = 0;
    opt.seed = 13;
    opt.scene.flat_objects = 16;
    const auto ds = synth::generate_dataset(opt, synth::reference_sensor(), synth::nonlinear_partner_sensor());
    int better = 0;
    for (const auto &p : ds.anchors) {
        AnnotationRecord chart_only;
        chart_only.chart_a = chart_only.chart_b = p.layout.chart;
        AnnotationRecord augmented = chart_only;
        for (std::size_t i = 0; i < p.layout.flat_regions.size() && augmented.regions.size() < 8; ++i)
            augmented.regions.push_back({p.layout.flat_regions[i], p.layout.flat_regions[i]});
        ASSERT_EQ(augmented.regions.size(), 8u);
        const auto base = build_anchor_pair(p.a_chart, p.a_free, p.b_chart, p.b_free, chart_only);
        const auto aug = build_anchor_pair(p.a_chart, p.a_free, p.b_chart, p.b_free, augmented);
        const double e_base = rms(base.a_to_b.image_b, p.b_free);
        const double e_aug = rms(aug.a_to_b.image_b, p.b_free);
        better += e_aug < e_base;
        EXPECT_LT(e_aug, e_base) << p.scene_id;
    }
    EXPECT_EQ(better, 3);
}

TEST(AnchorPair, ZeroRegionsIsChartOnlyFit)
{
    synth::DatasetOptions opt;
    opt.n_unpaired = 0;
    opt.n_anchor = 1;
    opt.n_test = 0;
    opt.seed = 14;
    const auto ds = synth::generate_dataset(opt, synth::reference_sensor(), synth::nonlinear_partner_sensor());
    const auto &p = ds.anchors[0];
    AnnotationRecord rec;
    rec.chart_a = rec.chart_b = p.layout.chart;
    const auto b = build_anchor_pair(p.a_chart, p.a_free, p.b_chart, p.b_free, rec);
    const auto samples = annotation_samples(p.a_chart, p.b_chart, rec);
    EXPECT_EQ(samples.size(), 24u);
    EXPECT_EQ(b.map_ab.m, fit_map(samples, Kernel::Poly11).m);
}

TEST(CalibrationMapJson, RoundTrip)
{
    std::mt19937_64 rng(15);
    const auto [m0, samples] = poly_problem(rng);
    CalibrationMap m = fit_map(samples, Kernel::Poly11);
    m.src_camera = "A";
    m.dst_camera = "B";
    const CalibrationMap back = CalibrationMap::from_json(m.to_json());
    EXPECT_EQ(back.kernel, Kernel::Poly11);
    EXPECT_EQ(back.m, m.m);
    EXPECT_EQ(back.src_camera, "A");
    EXPECT_EQ(back.dst_camera, "B");
    EXPECT_EQ(back.fit_residual_rms, m.fit_residual_rms);
}
