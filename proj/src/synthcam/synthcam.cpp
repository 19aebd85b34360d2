// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the raw2raw Project.

#include "raw2raw/synthcam.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "raw2raw/error.hpp"

namespace raw2raw::synth {

std::vector<double> default_grid()
{
    std::vector<double> g;
    for (int l = 400; l <= 700; l += 10)
        g.push_back(l);
    return g;
}

std::vector<double> grid_weights(const std::vector<double> &grid)
{
    const std::size_t n = grid.size();
    if (n < 2)
        throw Error(ErrorCode::Grid, "wavelength grid needs at least two samples");
    std::vector<double> w(n);
    w[0] = grid[1] - grid[0];
    w[n - 1] = grid[n - 1] - grid[n - 2];
    for (std::size_t i = 1; i + 1 < n; ++i)
        w[i] = 0.5 * (grid[i + 1] - grid[i - 1]);
    return w;
}

namespace {

void validate_grid(const std::vector<double> &grid)
{
    if (grid.size() < 2)
        throw Error(ErrorCode::Grid, "wavelength grid needs at least two samples");
    for (std::size_t i = 1; i < grid.size(); ++i)
        if (!(grid[i] > grid[i - 1]))
            throw Error(ErrorCode::Grid, "wavelength grid must be strictly increasing");
}

} // namespace

void SpectralSensor::validate() const
{
    validate_grid(wavelengths);
    for (const auto &ch : sensitivity) {
        if (ch.size() != wavelengths.size())
            throw Error(ErrorCode::Grid, "sensor '" + name + "' curve length differs from its grid");
        for (double v : ch)
            if (!(v >= 0) || !std::isfinite(v))
                throw Error(ErrorCode::Grid, "sensor '" + name + "' has a negative or non-finite sensitivity");
    }
}

void SpectralScene::validate() const
{
    validate_grid(wavelengths);
    if (illuminant.size() != bands())
        throw Error(ErrorCode::Grid, "illuminant length differs from the scene grid");
    if (reflectance.size() != static_cast<std::size_t>(height) * width * bands())
        throw Error(ErrorCode::Shape, "reflectance cube has the wrong size");
    for (double v : illuminant)
        if (!(v >= 0))
            throw Error(ErrorCode::Grid, "illuminant must be non-negative");
}

SpectralSensor gaussian_sensor(std::string name, const std::array<std::vector<GaussianLobe>, 3> &channels,
                               const std::vector<double> &grid)
{
    SpectralSensor s;
    s.name = std::move(name);
    s.wavelengths = grid;
    for (int c = 0; c < 3; ++c) {
        s.sensitivity[c].assign(grid.size(), 0.0);
        for (const auto &lobe : channels[c])
            for (std::size_t i = 0; i < grid.size(); ++i) {
                const double d = (grid[i] - lobe.peak_nm) / lobe.width_nm;
                s.sensitivity[c][i] += lobe.gain * std::exp(-0.5 * d * d);
            }
    }
    s.validate();
    return s;
}

SpectralSensor mixed_sensor(std::string name, const SpectralSensor &base, const std::array<double, 9> &mix)
{
    SpectralSensor s;
    s.name = std::move(name);
    s.wavelengths = base.wavelengths;
    for (int r = 0; r < 3; ++r) {
        s.sensitivity[r].assign(base.wavelengths.size(), 0.0);
        for (int c = 0; c < 3; ++c)
            for (std::size_t i = 0; i < base.wavelengths.size(); ++i)
                s.sensitivity[r][i] += mix[r * 3 + c] * base.sensitivity[c][i];
    }
    s.validate();
    return s;
}

SpectralSensor reference_sensor(const std::vector<double> &grid)
{
    return gaussian_sensor("synthA", {{{{600, 40, 1.0}}, {{540, 42, 1.0}}, {{460, 32, 0.9}}}}, grid);
}

std::array<double, 9> linear_partner_mix() { return {0.80, 0.25, 0.02, 0.10, 0.85, 0.08, 0.00, 0.15, 0.90}; }

SpectralSensor linear_partner_sensor(const std::vector<double> &grid)
{
    return mixed_sensor("synthB", reference_sensor(grid), linear_partner_mix());
}

SpectralSensor nonlinear_partner_sensor(const std::vector<double> &grid)
{
    return gaussian_sensor("synthB",
                           {{{{650, 20, 1.0}}, {{565, 20, 1.0}}, {{430, 18, 0.9}}}}, grid);
}

PackedImage render_linear(const SpectralScene &scene, const SpectralSensor &sensor)
{
    scene.validate();
    sensor.validate();
    if (scene.wavelengths != sensor.wavelengths)
        throw Error(ErrorCode::Grid, "scene and sensor '" + sensor.name + "' use different wavelength grids");

    const auto w = grid_weights(scene.wavelengths);
    const std::size_t nb = scene.bands();
    // Pre-multiply illuminant, sensitivity and integration weight.
    std::array<std::vector<double>, 3> kernel;
    for (int c = 0; c < 3; ++c) {
        kernel[c].resize(nb);
        for (std::size_t l = 0; l < nb; ++l)
            kernel[c][l] = scene.illuminant[l] * sensor.sensitivity[c][l] * w[l];
    }

    PackedImage out(scene.height, scene.width, 3);
    out.camera_id = sensor.name;
    for (int y = 0; y < scene.height; ++y)
        for (int x = 0; x < scene.width; ++x) {
            const double *r = scene.reflectance_at(y, x);
            for (int c = 0; c < 3; ++c) {
                double s = 0;
                for (std::size_t l = 0; l < nb; ++l)
                    s += r[l] * kernel[c][l];
                out.at(y, x, c) = static_cast<float>(s);
            }
        }
    return out;
}

Vec3 illuminant_response(const SpectralScene &scene, const SpectralSensor &sensor)
{
    const auto w = grid_weights(scene.wavelengths);
    Vec3 out{};
    for (int c = 0; c < 3; ++c)
        for (std::size_t l = 0; l < scene.bands(); ++l)
            out[c] += scene.illuminant[l] * sensor.sensitivity[c][l] * w[l];
    return out;
}

double exposure_for(const std::vector<const PackedImage *> &images, double percentile, double level)
{
    std::vector<float> values;
    for (const auto *img : images)
        values.insert(values.end(), img->data.begin(), img->data.end());
    if (values.empty())
        return 1.0;
    const auto k = static_cast<std::size_t>(
        std::clamp(std::ceil(percentile * static_cast<double>(values.size())) - 1.0, 0.0, double(values.size() - 1)));
    std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(k), values.end());
    const double p = values[k];
    return p > 0 ? level / p : 1.0;
}

PackedImage apply_exposure(const PackedImage &linear, double exposure)
{
    PackedImage out = linear;
    for (auto &v : out.data)
        v = static_cast<float>(std::clamp(double(v) * exposure, 0.0, 1.0));
    return out;
}

Rendered render(const SpectralScene &scene, const SpectralSensor &sensor, std::optional<double> exposure)
{
    const PackedImage linear = render_linear(scene, sensor);
    Rendered r;
    r.exposure = exposure ? *exposure : exposure_for({&linear});
    r.image = apply_exposure(linear, r.exposure);
    return r;
}

// ---------------------------------------------------------------------------

std::vector<double> random_reflectance(std::mt19937_64 &rng, const std::vector<double> &grid)
{
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double base = 0.02 + 0.25 * u(rng);
    const int bumps = 1 + static_cast<int>(u(rng) * 3);
    std::vector<double> r(grid.size(), base);
    for (int b = 0; b < bumps; ++b) {
        const double center = 380 + 340 * u(rng);
        const double width = 20 + 60 * u(rng);
        const double amp = 0.15 + 0.7 * u(rng);
        for (std::size_t i = 0; i < grid.size(); ++i) {
            const double d = (grid[i] - center) / width;
            r[i] += amp * std::exp(-0.5 * d * d);
        }
    }
    for (auto &v : r)
        v = std::clamp(v, 0.0, 1.0);
    return r;
}

std::vector<double> blackbody(double kelvin, const std::vector<double> &grid)
{
    constexpr double c2 = 1.4388e-2; // m K
    std::vector<double> out(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double lm = grid[i] * 1e-9;
        out[i] = 1.0 / (std::pow(lm, 5) * (std::exp(c2 / (lm * kelvin)) - 1.0));
    }
    const double peak = *std::max_element(out.begin(), out.end());
    for (auto &v : out)
        v /= peak;
    return out;
}

std::vector<double> random_illuminant(std::mt19937_64 &rng, const std::vector<double> &grid, double t_min,
                                      double t_max)
{
    std::uniform_real_distribution<double> u(t_min, t_max);
    return blackbody(u(rng), grid);
}

std::vector<std::vector<double>> chart_reflectances(const std::vector<double> &grid)
{
    // Fixed generator so every chart is the same physical object.
    std::mt19937_64 rng(0x5eed0c4a27ULL);
    std::vector<std::vector<double>> out;
    for (int i = 0; i < 18; ++i)
        out.push_back(random_reflectance(rng, grid));
    for (double v : {0.90, 0.59, 0.36, 0.19, 0.09, 0.03})
        out.emplace_back(grid.size(), v);
    return out;
}

void insert_chart(SpectralScene &scene, int x0, int y0, int patch_px, int gap_px, SceneLayout &layout)
{
    const auto spectra = chart_reflectances(scene.wavelengths);
    layout.chart.clear();
    layout.achromatic.clear();
    for (int row = 0; row < 4; ++row)
        for (int col = 0; col < 6; ++col) {
            const int idx = row * 6 + col;
            const int px = x0 + col * (patch_px + gap_px);
            const int py = y0 + row * (patch_px + gap_px);
            if (px + patch_px > scene.width || py + patch_px > scene.height)
                throw Error(ErrorCode::Bounds, "chart does not fit in the scene");
            for (int y = py; y < py + patch_px; ++y)
                for (int x = px; x < px + patch_px; ++x)
                    std::copy(spectra[idx].begin(), spectra[idx].end(), scene.reflectance_at(y, x));
            // Sample the interior, away from patch borders.
            const int inset = std::max(1, patch_px / 5);
            const Patch sample{px + inset, py + inset, patch_px - 2 * inset};
            layout.chart.push_back({sample, "P" + std::to_string(idx + 1)});
            if (row == 3)
                layout.achromatic.push_back(sample);
        }
}

SpectralScene random_scene(std::mt19937_64 &rng, const SceneOptions &opt, SceneLayout &layout,
                           const std::vector<double> &grid)
{
    std::uniform_real_distribution<double> u(0.0, 1.0);
    SpectralScene s;
    s.height = opt.height;
    s.width = opt.width;
    s.wavelengths = grid;
    s.illuminant = random_illuminant(rng, grid);
    s.reflectance.assign(static_cast<std::size_t>(s.height) * s.width * grid.size(), 0.0);
    layout = {};

    const int k = std::max(1, opt.base_spectra);
    std::vector<std::vector<double>> base;
    for (int i = 0; i < k; ++i)
        base.push_back(random_reflectance(rng, grid));

    // Smooth spatial weight fields, one per base spectrum.
    struct Blob
    {
        double cx, cy, s, a;
    };
    std::vector<std::vector<Blob>> blobs(k);
    const double scale = std::max(s.width, s.height);
    for (auto &field : blobs)
        for (int j = 0; j < 3; ++j)
            field.push_back({u(rng) * s.width, u(rng) * s.height, (0.1 + 0.3 * u(rng)) * scale, 0.2 + u(rng)});
    const double shade_angle = u(rng) * 6.283185307179586;
    const double sx = std::cos(shade_angle), sy = std::sin(shade_angle);

    std::vector<double> weight(k);
    for (int y = 0; y < s.height; ++y)
        for (int x = 0; x < s.width; ++x) {
            double total = 0;
            for (int i = 0; i < k; ++i) {
                double f = 1e-3;
                for (const auto &b : blobs[i]) {
                    const double dx = x - b.cx, dy = y - b.cy;
                    f += b.a * std::exp(-(dx * dx + dy * dy) / (2 * b.s * b.s));
                }
                weight[i] = f * f;
                total += weight[i];
            }
            const double t = 0.5 + 0.5 * ((x / double(s.width) - 0.5) * sx + (y / double(s.height) - 0.5) * sy);
            const double shade = opt.shading_min + (1.0 - opt.shading_min) * std::clamp(t, 0.0, 1.0);
            double *r = s.reflectance_at(y, x);
            for (std::size_t l = 0; l < grid.size(); ++l) {
                double v = 0;
                for (int i = 0; i < k; ++i)
                    v += weight[i] / total * base[i][l];
                r[l] = shade * v;
            }
        }

    // Flat objects: uniform reflectance squares that do not overlap each other.
    for (int o = 0; o < opt.flat_objects; ++o) {
        const auto spec = random_reflectance(rng, grid);
        for (int attempt = 0; attempt < 32; ++attempt) {
            const int size = std::max(6, static_cast<int>((0.08 + 0.1 * u(rng)) * std::min(s.width, s.height)));
            const int x0 = static_cast<int>(u(rng) * (s.width - size));
            const int y0 = static_cast<int>(u(rng) * (s.height - size));
            const Patch cand{x0, y0, size};
            bool clash = false;
            for (const Patch &q : layout.flat_regions)
                clash = clash || (cand.x < q.x + q.size + 1 && q.x < cand.x + cand.size + 1 &&
                                  cand.y < q.y + q.size + 1 && q.y < cand.y + cand.size + 1);
            if (clash)
                continue;
            for (int y = y0; y < y0 + size; ++y)
                for (int x = x0; x < x0 + size; ++x)
                    std::copy(spec.begin(), spec.end(), s.reflectance_at(y, x));
            layout.flat_regions.push_back(cand);
            break;
        }
    }
    // Regions are reported one pixel inside the object boundary.
    for (Patch &p : layout.flat_regions)
        p = {p.x + 1, p.y + 1, p.size - 2};
    return s;
}

// ---------------------------------------------------------------------------

namespace {

double lobe(double l, double mu, double s1, double s2)
{
    const double t = (l - mu) / (l < mu ? s1 : s2);
    return std::exp(-0.5 * t * t);
}

} // namespace

Vec3 cie_cmf(double l)
{
    return {1.056 * lobe(l, 599.8, 37.9, 31.0) + 0.362 * lobe(l, 442.0, 16.0, 26.7) - 0.065 * lobe(l, 501.1, 20.4, 26.2),
            0.821 * lobe(l, 568.8, 46.9, 40.5) + 0.286 * lobe(l, 530.9, 16.3, 31.1),
            1.217 * lobe(l, 437.0, 11.8, 36.0) + 0.681 * lobe(l, 459.0, 26.0, 13.8)};
}

eval::CameraColorProfile derive_profile(const SpectralSensor &sensor, const std::string &camera_id)
{
    sensor.validate();
    const auto &grid = sensor.wavelengths;
    const auto w = grid_weights(grid);

    auto spectra = chart_reflectances(grid);
    std::mt19937_64 rng(0x9e3779b97f4a7c15ULL);
    for (int i = 0; i < 100; ++i)
        spectra.push_back(random_reflectance(rng, grid));

    auto integrate = [&](const std::vector<double> &r) {
        Vec3 cam{}, xyz{};
        for (std::size_t l = 0; l < grid.size(); ++l) {
            const Vec3 cmf = cie_cmf(grid[l]);
            for (int c = 0; c < 3; ++c) {
                cam[c] += r[l] * sensor.sensitivity[c][l] * w[l];
                xyz[c] += r[l] * cmf[c] * w[l];
            }
        }
        return std::pair{cam, xyz};
    };
    const auto [cam_white, xyz_white] = integrate(std::vector<double>(grid.size(), 1.0));

    Eigen::MatrixXd cam(spectra.size(), 3), xyz(spectra.size(), 3);
    for (std::size_t i = 0; i < spectra.size(); ++i) {
        const auto [c, x] = integrate(spectra[i]);
        for (int k = 0; k < 3; ++k) {
            cam(static_cast<Eigen::Index>(i), k) = c[k] / cam_white[k];
            xyz(static_cast<Eigen::Index>(i), k) = x[k] / xyz_white[k] * eval::kD65White[k];
        }
    }
    const Eigen::MatrixXd mt = cam.colPivHouseholderQr().solve(xyz); // cam * mt ~ xyz
    Eigen::Matrix3d m = mt.transpose();
    const Eigen::Vector3d row_sums = m * Eigen::Vector3d::Ones();
    for (int r = 0; r < 3; ++r)
        m.row(r) *= eval::kD65White[r] / row_sums(r);

    eval::CameraColorProfile p;
    p.camera_id = camera_id;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c)
            p.xyz_matrix[r * 3 + c] = m(r, c);
    return p;
}

} // namespace raw2raw::synth
