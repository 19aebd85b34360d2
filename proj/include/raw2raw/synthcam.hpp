// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the raw2raw Project.

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "raw2raw/evalkit.hpp"
#include "raw2raw/image.hpp"

namespace raw2raw::synth {

/// 400-700 nm in 10 nm steps.
std::vector<double> default_grid();

/// Integration weight of each grid sample. On a uniform grid every weight is
/// the step; on irregular grids interior samples get half the span to their
/// neighbours and end samples the distance to their only neighbour.
std::vector<double> grid_weights(const std::vector<double> &grid);

struct SpectralSensor
{
    std::string name;
    std::vector<double> wavelengths;
    std::array<std::vector<double>, 3> sensitivity;

    void validate() const;
};

struct SpectralScene
{
    int height = 0;
    int width = 0;
    std::vector<double> wavelengths;
    std::vector<double> illuminant;
    std::vector<double> reflectance; // h x w x |grid|

    std::size_t bands() const { return wavelengths.size(); }
    double *reflectance_at(int y, int x)
    {
        return &reflectance[(static_cast<std::size_t>(y) * width + x) * bands()];
    }
    const double *reflectance_at(int y, int x) const
    {
        return &reflectance[(static_cast<std::size_t>(y) * width + x) * bands()];
    }
    void validate() const;
};

struct GaussianLobe
{
    double peak_nm;
    double width_nm;
    double gain = 1.0;
};

/// Sensor whose channels are sums of Gaussian lobes.
SpectralSensor gaussian_sensor(std::string name, const std::array<std::vector<GaussianLobe>, 3> &channels,
                               const std::vector<double> &grid = default_grid());

/// Sensor with S_out = mix * S_base (row-major 3x3, non-negative entries).
SpectralSensor mixed_sensor(std::string name, const SpectralSensor &base, const std::array<double, 9> &mix);

/// Reference sensor used by the synthetic presets.
SpectralSensor reference_sensor(const std::vector<double> &grid = default_grid());
/// Sensor related to the reference by an exact 3x3 mixing.
SpectralSensor linear_partner_sensor(const std::vector<double> &grid = default_grid());
/// Sensor with shifted and narrowed curves relative to the reference, so no
/// 3x3 matrix relates the two responses exactly.
SpectralSensor nonlinear_partner_sensor(const std::vector<double> &grid = default_grid());
std::array<double, 9> linear_partner_mix();

/// Per-pixel sum of illuminant x reflectance x sensitivity x grid weight,
/// without exposure scaling or clipping.
PackedImage render_linear(const SpectralScene &scene, const SpectralSensor &sensor);

/// Sensor response to a perfect white reflector under the scene illuminant.
Vec3 illuminant_response(const SpectralScene &scene, const SpectralSensor &sensor);

/// Exposure that maps the given percentile of all pooled channel values to
/// `level`. Returns 1 for all-zero inputs.
double exposure_for(const std::vector<const PackedImage *> &linear_images, double percentile = 0.99,
                    double level = 1.0);

struct Rendered
{
    PackedImage image;
    double exposure = 1.0;
};

/// render_linear, scaled by `exposure` (or by exposure_for of this image
/// alone when not given), then clipped to [0,1].
Rendered render(const SpectralScene &scene, const SpectralSensor &sensor, std::optional<double> exposure = {});

PackedImage apply_exposure(const PackedImage &linear, double exposure);

// ---------------------------------------------------------------------------
// Scene generation

/// Smooth reflectance: base level plus Gaussian bumps, clipped to [0,1].
std::vector<double> random_reflectance(std::mt19937_64 &rng, const std::vector<double> &grid);

/// Planck-shaped illuminant at a random temperature, peak-normalized.
std::vector<double> random_illuminant(std::mt19937_64 &rng, const std::vector<double> &grid,
                                      double t_min = 2500, double t_max = 9000);
std::vector<double> blackbody(double kelvin, const std::vector<double> &grid);

/// 24 chart reflectances in a 4x6 layout; the last row is achromatic.
std::vector<std::vector<double>> chart_reflectances(const std::vector<double> &grid);

struct SceneLayout
{
    /// Homogeneous rectangles of a single reflectance (square sub-patches).
    std::vector<Patch> flat_regions;
    std::vector<LabeledPatch> chart;
    std::vector<Patch> achromatic;
};

struct SceneOptions
{
    int height = 128;
    int width = 128;
    int base_spectra = 4;
    int flat_objects = 6;
    double shading_min = 0.5;
};

SpectralScene random_scene(std::mt19937_64 &rng, const SceneOptions &opt, SceneLayout &layout,
                           const std::vector<double> &grid = default_grid());

/// Paints the 24-patch chart into the scene; returns the patch layout.
void insert_chart(SpectralScene &scene, int x0, int y0, int patch_px, int gap_px, SceneLayout &layout);

// ---------------------------------------------------------------------------
// Color profile

/// Approximate CIE 1931 2-degree color matching functions (multi-lobe fit).
Vec3 cie_cmf(double lambda_nm);

/// Camera-to-XYZ matrix fitted over chart and random reflectances under an
/// equal-energy illuminant, scaled so white-balanced (1,1,1) maps to D65.
eval::CameraColorProfile derive_profile(const SpectralSensor &sensor, const std::string &camera_id);

// ---------------------------------------------------------------------------
// Datasets

struct DatasetOptions
{
    int n_unpaired = 8;
    int n_anchor = 2;
    int n_test = 2;
    SceneOptions scene;
    std::uint64_t seed = 0;
    double exposure_percentile = 0.99;
    double exposure_level = 1.0;
    std::string camera_a = "synthA";
    std::string camera_b = "synthB";
};

/// One scene seen by both cameras, with and without the chart.
struct PairedScene
{
    std::string scene_id;
    PackedImage a_free, b_free, a_chart, b_chart;
    /// Shared by both cameras and both captures of the scene.
    double exposure = 1.0;
    Vec3 illuminant_a{}, illuminant_b{};
    SceneLayout layout;
};

struct UnpairedScene
{
    std::string scene_id;
    PackedImage image;
    double exposure = 1.0;
    Vec3 illuminant{};
};

struct SyntheticDataset
{
    DatasetOptions options;
    std::vector<UnpairedScene> unpaired_a, unpaired_b;
    std::vector<PairedScene> anchors, tests;
};

SyntheticDataset generate_dataset(const DatasetOptions &opt, const SpectralSensor &sensor_a,
                                  const SpectralSensor &sensor_b);

struct ManifestEntry
{
    std::string path;
    std::string camera_id;
    std::string split;
    std::string scene_id;
    std::string role; // "free" or "chart"
    double exposure = 1.0;
};

struct Manifest
{
    std::uint64_t seed = 0;
    std::string sensor_a, sensor_b;
    std::vector<ManifestEntry> entries;

    std::string to_json() const;
    static Manifest from_json(const std::string &text);
};

/// Writes frames (three-channel containers), profiles and manifest.json
/// under `root`; returns the manifest. Paths in the manifest are relative
/// to `root`.
Manifest write_dataset(const SyntheticDataset &ds, const SpectralSensor &sensor_a, const SpectralSensor &sensor_b,
                       const std::filesystem::path &root);

Manifest make_paired_dataset(int n_scenes, const SpectralSensor &sensor_a, const SpectralSensor &sensor_b,
                             std::uint64_t seed, const std::filesystem::path &root);

} // namespace raw2raw::synth
