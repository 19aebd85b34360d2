// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the raw2raw Project.

#include "raw2raw/nnmap/inference.hpp"

#include <cmath>

#include "raw2raw/nnmap/trainer.hpp"

namespace raw2raw::nn {

float postprocess_value(float v)
{
    if (!std::isfinite(v))
        throw Error(ErrorCode::Numeric, "network output is not finite");
    return std::clamp(v, 0.0f, 1.0f);
}

PackedImage postprocess(const Tensor<float> &raw, int sample)
{
    PackedImage out(raw.h, raw.w, raw.c);
    for (int c = 0; c < raw.c; ++c)
        for (int y = 0; y < raw.h; ++y)
            for (int x = 0; x < raw.w; ++x)
                out.at(y, x, c) = postprocess_value(raw.at(c, sample, y, x));
    return out;
}

namespace {

struct Wiring
{
    const Encoder<float> *enc;
    const Decoder<float> *dec;
};

Tensor<float> run(const Wiring &w, const Tensor<float> &x)
{
    return w.dec->forward(w.enc->forward(x));
}

int round_up(int v, int a)
{
    return (v + a - 1) / a * a;
}

// Ramp weights along one axis of a tile at [start, start + len) in [0, total).
std::vector<float> ramp(int start, int len, int total, int overlap)
{
    std::vector<float> w(len, 1.0f);
    if (overlap <= 0)
        return w;
    for (int i = 0; i < len; ++i) {
        float v = 1.0f;
        if (start > 0)
            v = std::min(v, static_cast<float>(i + 1) / static_cast<float>(overlap + 1));
        if (start + len < total)
            v = std::min(v, static_cast<float>(len - i) / static_cast<float>(overlap + 1));
        w[i] = v;
    }
    return w;
}

std::vector<int> tile_starts(int total, int tile, int overlap, int align)
{
    if (total <= tile)
        return {0};
    const int stride = std::max(align, (tile - overlap) / align * align);
    std::vector<int> s;
    for (int p = 0;; p += stride) {
        if (p + tile >= total) {
            s.push_back(total - tile);
            break;
        }
        s.push_back(p);
    }
    return s;
}

PackedImage run_image(const PackedImage &img, const MappingModel &model, const Wiring &w, const TileOptions *tiles)
{
    if (img.channels != model.arch.in_channels)
        throw Error(ErrorCode::Shape, "image has " + std::to_string(img.channels) +
                                          " channels, the model expects " + std::to_string(model.arch.in_channels));
    if (img.height < 1 || img.width < 1)
        throw Error(ErrorCode::Shape, "empty image");
    const int align = model.arch.alignment();
    const int H = round_up(img.height, align), W = round_up(img.width, align);
    const PackedImage padded = reflect_pad(img, H, W);

    Tensor<float> out(img.channels, 1, H, W);
    if (!tiles || (H <= std::max(align, tiles->tile / align * align) &&
                   W <= std::max(align, tiles->tile / align * align))) {
        out = run(w, to_tensor<float>(padded));
    } else {
        const int tile = std::max(align, tiles->tile / align * align);
        const int th = std::min(tile, H), tw = std::min(tile, W);
        std::vector<float> acc(static_cast<std::size_t>(img.channels) * H * W, 0.0f);
        std::vector<float> wsum(static_cast<std::size_t>(H) * W, 0.0f);
        for (int y0 : tile_starts(H, th, tiles->overlap, align)) {
            const auto wy = ramp(y0, th, H, tiles->overlap);
            for (int x0 : tile_starts(W, tw, tiles->overlap, align)) {
                const auto wx = ramp(x0, tw, W, tiles->overlap);
                const Tensor<float> t = run(w, to_tensor<float>(crop_image(padded, x0, y0, tw, th)));
                for (int y = 0; y < th; ++y)
                    for (int x = 0; x < tw; ++x) {
                        const float wt = wy[y] * wx[x];
                        wsum[static_cast<std::size_t>(y0 + y) * W + x0 + x] += wt;
                        for (int c = 0; c < img.channels; ++c)
                            acc[(static_cast<std::size_t>(c) * H + y0 + y) * W + x0 + x] += wt * t.at(c, 0, y, x);
                    }
            }
        }
        for (int c = 0; c < img.channels; ++c)
            for (int y = 0; y < H; ++y)
                for (int x = 0; x < W; ++x)
                    out.at(c, 0, y, x) = acc[(static_cast<std::size_t>(c) * H + y) * W + x] /
                                         wsum[static_cast<std::size_t>(y) * W + x];
    }
    PackedImage full = postprocess(out);
    PackedImage res = crop_image(full, 0, 0, img.width, img.height);
    return res;
}

Wiring wiring(const MappingModel &m, Direction d)
{
    return d == Direction::A2B ? Wiring{&m.encoder_a, &m.decoder_b} : Wiring{&m.encoder_b, &m.decoder_a};
}

} // namespace

PackedImage map_image(const PackedImage &img, const MappingModel &model, Direction direction,
                      const TileOptions &tiles)
{
    PackedImage out = run_image(img, model, wiring(model, direction), &tiles);
    out.camera_id = direction == Direction::A2B ? "mapped_A2B" : "mapped_B2A";
    return out;
}

PackedImage map_image_untiled(const PackedImage &img, const MappingModel &model, Direction direction)
{
    PackedImage out = run_image(img, model, wiring(model, direction), nullptr);
    out.camera_id = direction == Direction::A2B ? "mapped_A2B" : "mapped_B2A";
    return out;
}

PackedImage reconstruct(const PackedImage &img, const MappingModel &model, Camera camera, const TileOptions &tiles)
{
    const Wiring w = camera == Camera::A ? Wiring{&model.encoder_a, &model.decoder_a}
                                         : Wiring{&model.encoder_b, &model.decoder_b};
    return run_image(img, model, w, &tiles);
}

} // namespace raw2raw::nn
