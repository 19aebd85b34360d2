// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the raw2raw Project.

#pragma once

#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "raw2raw/image.hpp"
#include "raw2raw/nnmap/losses.hpp"

namespace raw2raw::nn {

struct TrainConfig
{
    double learning_rate = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_epsilon = 1e-8;
    int batch_size = 16;
    int patch_size = 256;
    int epochs = 140;
    LossSwitches loss_switches;
    double paired_fraction = 0.5;
    std::uint64_t seed = 0;
    /// Optimizer steps per epoch; 0 derives it from the training set size
    /// (total patch count over all images divided by the batch size).
    int iterations_per_epoch = 0;
    /// Checkpoint period in epochs (0 disables); needs checkpoint_dir.
    int checkpoint_every = 0;
    std::filesystem::path checkpoint_dir;
    ArchitectureSpec arch;

    /// Throws Error(Config) on inconsistent settings.
    void validate() const;
};

TrainConfig load_train_config(const std::filesystem::path &path);
TrainConfig train_config_from_json(const std::string &text);
std::string train_config_to_json(const TrainConfig &cfg);

struct TrainingData
{
    std::vector<PackedImage> unpaired_a, unpaired_b;
    /// Pixel-aligned (camera A, camera B) pairs.
    std::vector<std::pair<PackedImage, PackedImage>> anchors;
};

enum class SampleSource { UnpairedA, UnpairedB, Anchor };

struct SampleOrigin
{
    SampleSource source;
    int index;
    int x;
    int y;
};

/// One mini-batch; every tensor is (C, n, P, P).
template <typename T>
struct Batch
{
    Tensor<T> unpaired_a, unpaired_b, anchor_a, anchor_b;
    std::vector<SampleOrigin> origins;
};

struct BatchComposition
{
    int anchors = 0;
    int unpaired_a = 0;
    int unpaired_b = 0;
};

/// Anchor count round(N * paired_fraction), the remainder split between
/// cameras (A takes the odd one). Without L_r every sample is an anchor;
/// with L_r only, every sample is unpaired.
BatchComposition batch_composition(const TrainConfig &cfg);

/// Random P x P crops; both images of an anchor share the crop window.
/// Images smaller than P are reflect-padded first.
Batch<float> sample_batch(const TrainingData &data, const TrainConfig &cfg, std::mt19937_64 &rng);

/// PackedImage (H, W, C) to a (C, 1, H, W) tensor and back.
template <typename T>
Tensor<T> to_tensor(const PackedImage &img);
PackedImage crop_image(const PackedImage &img, int x, int y, int w, int h);
/// Mirror padding (edge not repeated) to at least `height` x `width`.
PackedImage reflect_pad(const PackedImage &img, int height, int width);

/// Forward and backward pass of the combined objective on one batch.
/// Parameter gradients are accumulated into `net` when `backprop` is set.
template <typename T>
LossComponents forward_backward(DualNetwork<T> &net, const Batch<T> &batch, const LossSwitches &switches,
                                bool backprop = true);

struct AdamState
{
    std::vector<std::vector<float>> m, v;
    long long step = 0;
};

void adam_step(MappingModel &model, AdamState &state, const TrainConfig &cfg);

struct EpochLoss
{
    int epoch = 0;
    double l_r = 0, l_a = 0, l_m = 0, total = 0;
};

std::string loss_log_csv(const std::vector<EpochLoss> &log);

struct TrainResult
{
    MappingModel model;
    std::vector<EpochLoss> log;
    /// Total loss of the first batch before any update.
    double initial_loss = 0;
    bool aborted = false;
    std::string abort_reason;
    int epochs_completed = 0;
    /// Number of unpaired samples drawn over the run.
    long long unpaired_samples_drawn = 0;
};

struct Checkpoint
{
    MappingModel model;
    AdamState adam;
    int epoch = 0;
    std::vector<EpochLoss> log;
};

int iterations_per_epoch(const TrainingData &data, const TrainConfig &cfg);

/// Adam optimization from a fresh seeded initialization, or from `resume`.
TrainResult train(const TrainingData &data, const TrainConfig &cfg, const Checkpoint *resume = nullptr);

} // namespace raw2raw::nn
