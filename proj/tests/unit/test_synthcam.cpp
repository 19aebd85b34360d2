// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the raw2raw Project.

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "raw2raw/error.hpp"
#include "raw2raw/rawio.hpp"
#include "raw2raw/synthcam.hpp"
#include "test_support.hpp"

using namespace raw2raw;
using namespace raw2raw::synth;

namespace {

SpectralScene random_cube(std::mt19937_64 &rng, int h, int w, const std::vector<double> &grid)
{
    SpectralScene s;
    s.height = h;
    s.width = w;
    s.wavelengths = grid;
    s.illuminant = random_illuminant(rng, grid);
    for (int i = 0; i < h * w; ++i) {
        const auto r = random_reflectance(rng, grid);
        s.reflectance.insert(s.reflectance.end(), r.begin(), r.end());
    }
    return s;
}

std::string slurp(const std::filesystem::path &p)
{
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

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

} // namespace

TEST(Grid, DefaultAndWeights)
{
    const auto g = default_grid();
    ASSERT_EQ(g.size(), 31u);
    EXPECT_EQ(g.front(), 400.0);
    EXPECT_EQ(g.back(), 700.0);
    for (double w : grid_weights(g))
        EXPECT_NEAR(w, 10.0, 1e-12);
    const auto wi = grid_weights({400, 410, 430});
    EXPECT_NEAR(wi[0], 10.0, 1e-12);
    EXPECT_NEAR(wi[1], 15.0, 1e-12);
    EXPECT_NEAR(wi[2], 20.0, 1e-12);
}

TEST(Render, ZeroReflectanceIsBlack)
{
    std::mt19937_64 rng(1);
    SpectralScene s = random_cube(rng, 4, 4, default_grid());
    std::fill(s.reflectance.begin(), s.reflectance.end(), 0.0);
    for (float v : render(s, reference_sensor(), 1.0).image.data)
        EXPECT_EQ(v, 0.0f);
}

TEST(Render, UnitSpikeSensor)
{
    const auto grid = default_grid();
    SpectralSensor spike;
    spike.name = "spike";
    spike.wavelengths = grid;
    for (int c = 0; c < 3; ++c) {
        spike.sensitivity[c].assign(grid.size(), 0.0);
        spike.sensitivity[c][5 + 7 * c] = 1.0;
    }
    SpectralScene s;
    s.height = 3;
    s.width = 2;
    s.wavelengths = grid;
    s.illuminant.assign(grid.size(), 1.0);
    s.reflectance.assign(6 * grid.size(), 1.0);
    const double exposure = 0.01;
    const auto img = render(s, spike, exposure).image;
    for (float v : img.data)
        EXPECT_NEAR(v, 10.0 * exposure, 1e-7);
}

TEST(Render, EqualSensitivitiesGiveIdenticalImages)
{
    std::mt19937_64 rng(2);
    const SpectralScene s = random_cube(rng, 6, 5, default_grid());
    SpectralSensor a = reference_sensor(), b = reference_sensor();
    b.name = "copy";
    const auto ra = render(s, a), rb = render(s, b);
    EXPECT_EQ(ra.image.data, rb.image.data);
    EXPECT_EQ(ra.exposure, rb.exposure);
}

TEST(Render, MatchesDirectSum)
{
    std::mt19937_64 rng(3);
    const auto grid = default_grid();
    const SpectralScene s = random_cube(rng, 3, 4, grid);
    const SpectralSensor sensor = nonlinear_partner_sensor();
    const PackedImage lin = render_linear(s, sensor);
    for (int y = 0; y < 3; ++y)
        for (int x = 0; x < 4; ++x)
            for (int c = 0; c < 3; ++c) {
                double sum = 0;
                for (std::size_t k = 0; k < grid.size(); ++k)
                    sum += s.illuminant[k] * s.reflectance_at(y, x)[k] * sensor.sensitivity[c][k] * 10.0;
                EXPECT_NEAR(lin.at(y, x, c), sum, 1e-5 * std::max(1.0, sum));
            }
}

TEST(Render, Linearity)
{
    std::mt19937_64 rng(4);
    SpectralScene s = random_cube(rng, 4, 4, default_grid());
    const PackedImage base = render_linear(s, reference_sensor());
    for (auto &v : s.illuminant)
        v *= 2.5;
    const PackedImage scaled = render_linear(s, reference_sensor());
    for (std::size_t i = 0; i < base.data.size(); ++i)
        EXPECT_NEAR(scaled.data[i], 2.5 * base.data[i], 1e-5 * std::max(1.0f, scaled.data[i]));
}

TEST(Render, ChannelGainCovariance)
{
    std::mt19937_64 rng(5);
    const SpectralScene s = random_cube(rng, 4, 4, default_grid());
    const SpectralSensor a = reference_sensor();
    const std::array<double, 3> g{0.5, 1.7, 3.0};
    SpectralSensor b = a;
    for (int c = 0; c < 3; ++c)
        for (auto &v : b.sensitivity[c])
            v *= g[c];
    const PackedImage la = render_linear(s, a), lb = render_linear(s, b);
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x)
            for (int c = 0; c < 3; ++c)
                EXPECT_NEAR(lb.at(y, x, c), g[c] * la.at(y, x, c), 1e-5 * std::max(1.0, g[c] * la.at(y, x, c)));
}

TEST(Render, GridMismatch)
{
    std::mt19937_64 rng(6);
    const SpectralScene s = random_cube(rng, 2, 2, default_grid());
    std::vector<double> other;
    for (double l = 400; l <= 700; l += 20)
        other.push_back(l);
    EXPECT_EQ(code_of([&] { render(s, reference_sensor(other)); }), ErrorCode::Grid);
}

TEST(Render, ExposurePutsPercentileAtOne)
{
    std::mt19937_64 rng(7);
    const SpectralScene s = random_cube(rng, 10, 10, default_grid());
    const PackedImage lin = render_linear(s, reference_sensor());
    const Rendered r = render(s, reference_sensor());
    std::vector<float> v = lin.data;
    std::sort(v.begin(), v.end());
    const std::size_t k = static_cast<std::size_t>(std::ceil(0.99 * v.size())) - 1;
    EXPECT_NEAR(v[k] * r.exposure, 1.0, 1e-6);
    for (float x : r.image.data) {
        EXPECT_GE(x, 0.0f);
        EXPECT_LE(x, 1.0f);
    }
}

TEST(Sensors, ValidAndLinearPartnerIsMix)
{
    const auto ref = reference_sensor();
    const auto lin = linear_partner_sensor();
    const auto mix = linear_partner_mix();
    EXPECT_NO_THROW(ref.validate());
    EXPECT_NO_THROW(lin.validate());
    EXPECT_NO_THROW(nonlinear_partner_sensor().validate());
    for (int c = 0; c < 3; ++c)
        for (std::size_t k = 0; k < ref.wavelengths.size(); ++k) {
            double v = 0;
            for (int j = 0; j < 3; ++j)
                v += mix[3 * c + j] * ref.sensitivity[j][k];
            EXPECT_NEAR(lin.sensitivity[c][k], v, 1e-12);
        }
}

TEST(Sensors, NegativeSensitivityRejected)
{
    SpectralSensor s = reference_sensor();
    s.sensitivity[1][3] = -0.1;
    EXPECT_EQ(code_of([&] { s.validate(); }), ErrorCode::Grid);
}

TEST(Dataset, GainSensorsGivePerChannelScaledImages)
{
    const SpectralSensor a = reference_sensor();
    const std::array<double, 9> gain{0.6, 0, 0, 0, 1.0, 0, 0, 0, 1.4};
    const SpectralSensor b = mixed_sensor("gain", a, gain);
    DatasetOptions opt;
    opt.n_unpaired = 0;
    opt.n_anchor = 1;
    opt.n_test = 1;
    opt.scene.height = opt.scene.width = 32;
    opt.exposure_level = 0.5; // keeps the scaled channels below clipping
    const auto ds = generate_dataset(opt, a, b);
    for (const auto &p : ds.tests) {
        for (int y = 0; y < 32; ++y)
            for (int x = 0; x < 32; ++x)
                for (int c = 0; c < 3; ++c) {
                    const double ea = p.a_free.at(y, x, c);
                    const double expected = gain[4 * c] * ea;
                    if (expected < 1.0 && ea < 1.0) {
                        EXPECT_NEAR(p.b_free.at(y, x, c), expected, 1e-5);
                    }
                }
    }
}

TEST(Dataset, SameSeedGivesByteIdenticalManifests)
{
    const auto d1 = test::scratch_dir("synth_seed1"), d2 = test::scratch_dir("synth_seed2");
    make_paired_dataset(1, reference_sensor(), nonlinear_partner_sensor(), 42, d1);
    make_paired_dataset(1, reference_sensor(), nonlinear_partner_sensor(), 42, d2);
    EXPECT_EQ(slurp(d1 / "manifest.json"), slurp(d2 / "manifest.json"));
    const auto m = Manifest::from_json(slurp(d1 / "manifest.json"));
    for (const auto &e : m.entries)
        EXPECT_EQ(slurp(d1 / e.path), slurp(d2 / e.path)) << e.path;
}

TEST(Dataset, OneSceneCounts)
{
    const auto dir = test::scratch_dir("synth_one");
    const Manifest m = make_paired_dataset(1, reference_sensor(), linear_partner_sensor(), 3, dir);
    std::map<std::string, int> per_split;
    for (const auto &e : m.entries)
        if (e.role == "free")
            ++per_split[e.split + ":" + e.camera_id];
    EXPECT_EQ(per_split["unpaired_A:" + reference_sensor().name], 1);
    EXPECT_EQ(per_split["unpaired_B:" + linear_partner_sensor().name], 1);
    EXPECT_EQ(per_split["anchor:" + reference_sensor().name], 1);
    EXPECT_EQ(per_split["test:" + linear_partner_sensor().name], 1);
    EXPECT_EQ(code_of([&] { make_paired_dataset(0, reference_sensor(), linear_partner_sensor(), 3, dir); }),
              ErrorCode::Config);
}

TEST(Dataset, PairsShareExposureAndChartMetadata)
{
    DatasetOptions opt;
    opt.n_unpaired = 1;
    opt.n_anchor = 2;
    opt.n_test = 1;
    opt.seed = 9;
    const auto ds = generate_dataset(opt, reference_sensor(), nonlinear_partner_sensor());
    ASSERT_EQ(ds.anchors.size(), 2u);
    for (const auto &p : ds.anchors) {
        EXPECT_EQ(p.layout.chart.size(), 24u);
        EXPECT_EQ(p.a_free.height, 128);
        EXPECT_GT(p.exposure, 0.0);
        for (const auto &lp : p.layout.chart)
            EXPECT_TRUE(lp.patch.inside(p.a_chart.width, p.a_chart.height));
        for (const auto &r : p.layout.flat_regions)
            EXPECT_TRUE(r.inside(p.a_free.width, p.a_free.height));
    }
    const auto dir = test::scratch_dir("synth_meta");
    write_dataset(ds, reference_sensor(), nonlinear_partner_sensor(), dir);
    const RawFrame chart = load_frame(dir / "pairs" / ds.anchors[0].scene_id / "a_chart.raw16");
    EXPECT_EQ(chart.meta.chart_patches.size(), 24u);
    EXPECT_TRUE(chart.meta.illuminant.has_value());
    EXPECT_EQ(chart.meta.cfa, CfaPattern::None3Ch);
}

TEST(Profile, MapsWhiteBalancedWhiteToD65)
{
    for (const auto &s : {reference_sensor(), nonlinear_partner_sensor()}) {
        const auto p = derive_profile(s, s.name);
        const Vec3 xyz = p.apply({1, 1, 1});
        EXPECT_NEAR(xyz[0], 0.95047, 1e-6);
        EXPECT_NEAR(xyz[1], 1.0, 1e-6);
        EXPECT_NEAR(xyz[2], 1.08883, 1e-6);
    }
}
