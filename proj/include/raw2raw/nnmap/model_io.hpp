// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the raw2raw Project.

#pragma once

#include <filesystem>

#include "raw2raw/nnmap/trainer.hpp"

namespace raw2raw::nn {

/// A model is stored as `<base>.json` (architecture, fingerprint, tensor
/// index) and `<base>.bin` (little-endian float32 payload). `path` may name
/// the base or either file.
void save_model(const MappingModel &model, const std::filesystem::path &path);
MappingModel load_model(const std::filesystem::path &path);

/// Model plus optimizer moments, step counter, epoch and loss log.
void save_checkpoint(const Checkpoint &ck, const std::filesystem::path &path);
Checkpoint load_checkpoint(const std::filesystem::path &path);

std::filesystem::path checkpoint_path(const std::filesystem::path &dir, int epoch);

/// `<base>.json` and `<base>.bin` for a model path.
std::filesystem::path model_json_path(const std::filesystem::path &path);
std::filesystem::path model_bin_path(const std::filesystem::path &path);

} // namespace raw2raw::nn
