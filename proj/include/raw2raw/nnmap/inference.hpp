// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the raw2raw Project.

#pragma once

#include "raw2raw/direction.hpp"
#include "raw2raw/image.hpp"
#include "raw2raw/nnmap/network.hpp"

namespace raw2raw::nn {

enum class Camera { A, B };

struct TileOptions
{
    /// Tile side; rounded down to a multiple of 2^E.
    int tile = 256;
    int overlap = 32;
};

/// Clips to [0,1]; Error(Numeric) on non-finite input.
PackedImage postprocess(const Tensor<float> &raw, int sample = 0);
float postprocess_value(float v);

/// Encoder of the source camera, decoder of the target camera. Images of
/// any size are reflect-padded to a multiple of 2^E and processed in
/// overlapping tiles blended with linear ramps.
PackedImage map_image(const PackedImage &img, const MappingModel &model, Direction direction,
                      const TileOptions &tiles = {});

/// Same wiring as map_image on the whole padded image at once.
PackedImage map_image_untiled(const PackedImage &img, const MappingModel &model, Direction direction);

/// Encoder and decoder of the same camera.
PackedImage reconstruct(const PackedImage &img, const MappingModel &model, Camera camera,
                        const TileOptions &tiles = {});

} // namespace raw2raw::nn
