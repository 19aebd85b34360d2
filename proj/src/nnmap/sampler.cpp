// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the raw2raw Project.

#include <cmath>

#include "raw2raw/nnmap/trainer.hpp"

namespace raw2raw::nn {

namespace {

int reflect101(int i, int n)
{
    if (n == 1)
        return 0;
    const int period = 2 * (n - 1);
    i %= period;
    if (i < 0)
        i += period;
    return i < n ? i : period - i;
}

int uniform_int(std::mt19937_64 &rng, int lo, int hi)
{
    return std::uniform_int_distribution<int>(lo, hi)(rng);
}

template <typename T>
void write_sample(Tensor<T> &dst, int slot, const PackedImage &img, int x0, int y0, int p)
{
    for (int c = 0; c < img.channels; ++c)
        for (int y = 0; y < p; ++y)
            for (int x = 0; x < p; ++x)
                dst.at(c, slot, y, x) = static_cast<T>(img.at(y0 + y, x0 + x, c));
}

} // namespace

PackedImage reflect_pad(const PackedImage &img, int height, int width)
{
    const int H = std::max(height, img.height), W = std::max(width, img.width);
    if (H == img.height && W == img.width)
        return img;
    PackedImage out(H, W, img.channels);
    out.camera_id = img.camera_id;
    for (int y = 0; y < H; ++y) {
        const int sy = reflect101(y, img.height);
        for (int x = 0; x < W; ++x) {
            const int sx = reflect101(x, img.width);
            for (int c = 0; c < img.channels; ++c)
                out.at(y, x, c) = img.at(sy, sx, c);
        }
    }
    return out;
}

PackedImage crop_image(const PackedImage &img, int x, int y, int w, int h)
{
    if (x < 0 || y < 0 || w < 0 || h < 0 || x + w > img.width || y + h > img.height)
        throw Error(ErrorCode::Bounds, "crop window outside the image");
    PackedImage out(h, w, img.channels);
    out.camera_id = img.camera_id;
    for (int yy = 0; yy < h; ++yy)
        std::copy_n(&img.data[img.index(y + yy, x, 0)], static_cast<std::size_t>(w) * img.channels,
                    &out.data[out.index(yy, 0, 0)]);
    return out;
}

template <typename T>
Tensor<T> to_tensor(const PackedImage &img)
{
    Tensor<T> t(img.channels, 1, img.height, img.width);
    for (int c = 0; c < img.channels; ++c)
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x)
                t.at(c, 0, y, x) = static_cast<T>(img.at(y, x, c));
    return t;
}

template Tensor<float> to_tensor(const PackedImage &);
template Tensor<double> to_tensor(const PackedImage &);

BatchComposition batch_composition(const TrainConfig &cfg)
{
    const auto &s = cfg.loss_switches;
    const int n = cfg.batch_size;
    BatchComposition bc;
    if (!s.use_r) {
        bc.anchors = n;
    } else if (!s.use_a && !s.use_m) {
        bc.unpaired_a = (n + 1) / 2;
        bc.unpaired_b = n / 2;
    } else {
        bc.anchors = static_cast<int>(std::lround(n * cfg.paired_fraction));
        const int rest = n - bc.anchors;
        bc.unpaired_a = (rest + 1) / 2;
        bc.unpaired_b = rest / 2;
    }
    return bc;
}

Batch<float> sample_batch(const TrainingData &data, const TrainConfig &cfg, std::mt19937_64 &rng)
{
    const BatchComposition bc = batch_composition(cfg);
    const int p = cfg.patch_size;
    if (bc.anchors > 0 && data.anchors.empty())
        throw Error(ErrorCode::Config, "the batch needs anchor pairs but the anchor set is empty");
    if (bc.unpaired_a > 0 && data.unpaired_a.empty())
        throw Error(ErrorCode::Config, "the batch needs unpaired camera A images but none were given");
    if (bc.unpaired_b > 0 && data.unpaired_b.empty())
        throw Error(ErrorCode::Config, "the batch needs unpaired camera B images but none were given");

    auto channels = [&]() {
        if (!data.anchors.empty())
            return data.anchors.front().first.channels;
        if (!data.unpaired_a.empty())
            return data.unpaired_a.front().channels;
        return data.unpaired_b.front().channels;
    }();

    Batch<float> b;
    b.anchor_a = Tensor<float>(channels, bc.anchors, p, p);
    b.anchor_b = Tensor<float>(channels, bc.anchors, p, p);
    b.unpaired_a = Tensor<float>(channels, bc.unpaired_a, p, p);
    b.unpaired_b = Tensor<float>(channels, bc.unpaired_b, p, p);

    auto pick = [&](const PackedImage &img, int &x, int &y) {
        x = uniform_int(rng, 0, std::max(img.width, p) - p);
        y = uniform_int(rng, 0, std::max(img.height, p) - p);
    };
    auto padded = [&](const PackedImage &img) -> PackedImage {
        if (img.channels != channels)
            throw Error(ErrorCode::Shape, "training images have mixed channel counts");
        return (img.width < p || img.height < p) ? reflect_pad(img, p, p) : img;
    };

    for (int i = 0; i < bc.anchors; ++i) {
        const int idx = uniform_int(rng, 0, static_cast<int>(data.anchors.size()) - 1);
        const auto &[ia, ib] = data.anchors[idx];
        if (!ia.same_shape(ib))
            throw Error(ErrorCode::Shape, "anchor images are not pixel-aligned");
        int x, y;
        pick(ia, x, y);
        write_sample(b.anchor_a, i, padded(ia), x, y, p);
        write_sample(b.anchor_b, i, padded(ib), x, y, p);
        b.origins.push_back({SampleSource::Anchor, idx, x, y});
    }
    for (int i = 0; i < bc.unpaired_a; ++i) {
        const int idx = uniform_int(rng, 0, static_cast<int>(data.unpaired_a.size()) - 1);
        int x, y;
        pick(data.unpaired_a[idx], x, y);
        write_sample(b.unpaired_a, i, padded(data.unpaired_a[idx]), x, y, p);
        b.origins.push_back({SampleSource::UnpairedA, idx, x, y});
    }
    for (int i = 0; i < bc.unpaired_b; ++i) {
        const int idx = uniform_int(rng, 0, static_cast<int>(data.unpaired_b.size()) - 1);
        int x, y;
        pick(data.unpaired_b[idx], x, y);
        write_sample(b.unpaired_b, i, padded(data.unpaired_b[idx]), x, y, p);
        b.origins.push_back({SampleSource::UnpairedB, idx, x, y});
    }
    return b;
}

} // namespace raw2raw::nn
