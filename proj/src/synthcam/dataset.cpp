// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the raw2raw Project.

#include <cmath>
#include <cstdio>
#include <fstream>

#include "json.hpp"
#include "raw2raw/error.hpp"
#include "raw2raw/rawio.hpp"
#include "raw2raw/synthcam.hpp"

namespace raw2raw::synth {

using nlohmann::json;

namespace {

enum class Split : std::uint64_t { UnpairedA = 1, UnpairedB = 2, Anchor = 3, Test = 4 };

std::mt19937_64 scene_rng(std::uint64_t seed, Split split, int index)
{
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(split), static_cast<std::uint32_t>(index)};
    return std::mt19937_64(seq);
}

std::string scene_name(const char *prefix, int index)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s%04d", prefix, index);
    return buf;
}

Vec3 unit(const Vec3 &v)
{
    const double n = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
    return n > 0 ? Vec3{v[0] / n, v[1] / n, v[2] / n} : v;
}

UnpairedScene make_unpaired(const DatasetOptions &opt, const SpectralSensor &sensor, const std::string &camera,
                            Split split, int index)
{
    auto rng = scene_rng(opt.seed, split, index);
    SceneLayout layout;
    const auto scene = random_scene(rng, opt.scene, layout, sensor.wavelengths);
    const auto linear = render_linear(scene, sensor);
    UnpairedScene u;
    u.scene_id = scene_name(split == Split::UnpairedA ? "ua" : "ub", index);
    u.exposure = exposure_for({&linear}, opt.exposure_percentile, opt.exposure_level);
    u.image = apply_exposure(linear, u.exposure);
    u.image.camera_id = camera;
    u.illuminant = unit(illuminant_response(scene, sensor));
    return u;
}

PairedScene make_paired(const DatasetOptions &opt, const SpectralSensor &sa, const SpectralSensor &sb, Split split,
                        int index)
{
    auto rng = scene_rng(opt.seed, split, index);
    PairedScene p;
    p.scene_id = scene_name(split == Split::Anchor ? "anchor" : "test", index);
    const auto free_scene = random_scene(rng, opt.scene, p.layout, sa.wavelengths);

    SpectralScene chart_scene = free_scene;
    const int patch_px = std::max(4, std::min(opt.scene.width, opt.scene.height) / 13);
    const int gap = std::max(1, patch_px / 4);
    const int chart_w = 6 * patch_px + 5 * gap;
    const int chart_h = 4 * patch_px + 3 * gap;
    std::uniform_int_distribution<int> px(0, std::max(0, opt.scene.width - chart_w));
    std::uniform_int_distribution<int> py(0, std::max(0, opt.scene.height - chart_h));
    const int x0 = px(rng), y0 = py(rng);
    insert_chart(chart_scene, x0, y0, patch_px, gap, p.layout);

    // Regions must stay visible next to the chart.
    std::vector<Patch> visible;
    for (const auto &r : p.layout.flat_regions)
        if (r.x >= x0 + chart_w || x0 >= r.x + r.size || r.y >= y0 + chart_h || y0 >= r.y + r.size)
            visible.push_back(r);
    p.layout.flat_regions = visible;

    const auto la = render_linear(free_scene, sa);
    const auto lb = render_linear(free_scene, sb);
    const auto ca = render_linear(chart_scene, sa);
    const auto cb = render_linear(chart_scene, sb);
    // The chart is exposed like a real calibration shot: no patch clips.
    double chart_peak = 0.0;
    for (const auto &lp : p.layout.chart)
        for (const auto *img : {&ca, &cb})
            for (int y = lp.patch.y; y < lp.patch.y + lp.patch.size; ++y)
                for (int x = lp.patch.x; x < lp.patch.x + lp.patch.size; ++x)
                    for (int c = 0; c < 3; ++c)
                        chart_peak = std::max(chart_peak, double(img->at(y, x, c)));
    p.exposure = exposure_for({&la, &lb}, opt.exposure_percentile, opt.exposure_level);
    if (chart_peak > 0)
        p.exposure = std::min(p.exposure, 0.98 * opt.exposure_level / chart_peak);
    p.a_free = apply_exposure(la, p.exposure);
    p.b_free = apply_exposure(lb, p.exposure);
    p.a_chart = apply_exposure(ca, p.exposure);
    p.b_chart = apply_exposure(cb, p.exposure);
    for (auto *img : {&p.a_free, &p.a_chart})
        img->camera_id = opt.camera_a;
    for (auto *img : {&p.b_free, &p.b_chart})
        img->camera_id = opt.camera_b;
    p.illuminant_a = unit(illuminant_response(free_scene, sa));
    p.illuminant_b = unit(illuminant_response(free_scene, sb));
    return p;
}

} // namespace

SyntheticDataset generate_dataset(const DatasetOptions &opt, const SpectralSensor &sensor_a,
                                  const SpectralSensor &sensor_b)
{
    sensor_a.validate();
    sensor_b.validate();
    if (sensor_a.wavelengths != sensor_b.wavelengths)
        throw Error(ErrorCode::Grid, "sensors use different wavelength grids");
    SyntheticDataset ds;
    ds.options = opt;
    for (int i = 0; i < opt.n_unpaired; ++i) {
        ds.unpaired_a.push_back(make_unpaired(opt, sensor_a, opt.camera_a, Split::UnpairedA, i));
        ds.unpaired_b.push_back(make_unpaired(opt, sensor_b, opt.camera_b, Split::UnpairedB, i));
    }
    for (int i = 0; i < opt.n_anchor; ++i)
        ds.anchors.push_back(make_paired(opt, sensor_a, sensor_b, Split::Anchor, i));
    for (int i = 0; i < opt.n_test; ++i)
        ds.tests.push_back(make_paired(opt, sensor_a, sensor_b, Split::Test, i));
    return ds;
}

std::string Manifest::to_json() const
{
    json j;
    j["seed"] = seed;
    j["sensor_a"] = sensor_a;
    j["sensor_b"] = sensor_b;
    json list = json::array();
    for (const auto &e : entries)
        list.push_back({{"path", e.path},
                        {"camera_id", e.camera_id},
                        {"split", e.split},
                        {"scene_id", e.scene_id},
                        {"role", e.role},
                        {"exposure", e.exposure}});
    j["entries"] = list;
    return j.dump(2) + "\n";
}

Manifest Manifest::from_json(const std::string &text)
{
    Manifest m;
    try {
        const json j = json::parse(text);
        m.seed = j.at("seed").get<std::uint64_t>();
        m.sensor_a = j.at("sensor_a").get<std::string>();
        m.sensor_b = j.at("sensor_b").get<std::string>();
        for (const auto &e : j.at("entries"))
            m.entries.push_back({e.at("path").get<std::string>(), e.at("camera_id").get<std::string>(),
                                 e.at("split").get<std::string>(), e.at("scene_id").get<std::string>(),
                                 e.value("role", std::string("free")), e.at("exposure").get<double>()});
    } catch (const json::exception &e) {
        throw Error(ErrorCode::Metadata, std::string("malformed manifest: ") + e.what());
    }
    return m;
}

Manifest write_dataset(const SyntheticDataset &ds, const SpectralSensor &sensor_a, const SpectralSensor &sensor_b,
                       const std::filesystem::path &root)
{
    namespace fs = std::filesystem;
    fs::create_directories(root);
    Manifest m;
    m.seed = ds.options.seed;
    m.sensor_a = sensor_a.name;
    m.sensor_b = sensor_b.name;

    auto put = [&](const PackedImage &img, const fs::path &rel, const std::string &split, const std::string &scene,
                   const std::string &role, double exposure, std::optional<Vec3> illum,
                   std::vector<LabeledPatch> chart) {
        save_frame(frame_from_image(img, illum, std::move(chart)), root / rel);
        m.entries.push_back({rel.generic_string(), img.camera_id, split, scene, role, exposure});
    };

    for (const auto &u : ds.unpaired_a)
        put(u.image, fs::path("unpaired_A") / (u.scene_id + ".raw16"), "unpaired_A", u.scene_id, "free", u.exposure,
            u.illuminant, {});
    for (const auto &u : ds.unpaired_b)
        put(u.image, fs::path("unpaired_B") / (u.scene_id + ".raw16"), "unpaired_B", u.scene_id, "free", u.exposure,
            u.illuminant, {});
    auto put_pair = [&](const PairedScene &p, const std::string &split) {
        const fs::path dir = fs::path("pairs") / p.scene_id;
        put(p.a_free, dir / "a_free.raw16", split, p.scene_id, "free", p.exposure, p.illuminant_a, {});
        put(p.b_free, dir / "b_free.raw16", split, p.scene_id, "free", p.exposure, p.illuminant_b, {});
        put(p.a_chart, dir / "a_chart.raw16", split, p.scene_id, "chart", p.exposure, p.illuminant_a, p.layout.chart);
        put(p.b_chart, dir / "b_chart.raw16", split, p.scene_id, "chart", p.exposure, p.illuminant_b, p.layout.chart);

        json layout;
        layout["split"] = split;
        json regions = json::array();
        for (const auto &r : p.layout.flat_regions)
            regions.push_back({{"x", r.x}, {"y", r.y}, {"size", r.size}});
        layout["flat_regions"] = regions;
        json achromatic = json::array();
        for (const auto &r : p.layout.achromatic)
            achromatic.push_back({{"x", r.x}, {"y", r.y}, {"size", r.size}});
        layout["achromatic"] = achromatic;
        std::ofstream(root / dir / "scene.json") << layout.dump(2) << "\n";
    };
    for (const auto &p : ds.anchors)
        put_pair(p, "anchor");
    for (const auto &p : ds.tests)
        put_pair(p, "test");

    eval::save_profile(derive_profile(sensor_a, ds.options.camera_a), root / "profile_A.json");
    eval::save_profile(derive_profile(sensor_b, ds.options.camera_b), root / "profile_B.json");
    std::ofstream out(root / "manifest.json");
    out << m.to_json();
    if (!out)
        throw Error(ErrorCode::Io, "failed writing manifest under " + root.string());
    return m;
}

Manifest make_paired_dataset(int n_scenes, const SpectralSensor &sensor_a, const SpectralSensor &sensor_b,
                             std::uint64_t seed, const std::filesystem::path &root)
{
    if (n_scenes < 1)
        throw Error(ErrorCode::Config, "n_scenes must be at least 1");
    DatasetOptions opt;
    opt.n_unpaired = opt.n_anchor = opt.n_test = n_scenes;
    opt.seed = seed;
    opt.camera_a = sensor_a.name;
    opt.camera_b = sensor_b.name;
    return write_dataset(generate_dataset(opt, sensor_a, sensor_b), sensor_a, sensor_b, root);
}

} // namespace raw2raw::synth
