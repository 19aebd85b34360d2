// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the raw2raw Project.

#pragma once

#include <cstddef>
#include <vector>

#include "raw2raw/error.hpp"

namespace raw2raw::nn {

/// Dense 4-D activation in channel-major (C, N, H, W) layout, so a layer's
/// output for a whole batch is one C x (N*H*W) matrix.
template <typename T>
struct Tensor
{
    int c = 0;
    int n = 0;
    int h = 0;
    int w = 0;
    std::vector<T> data;

    Tensor() = default;
    Tensor(int channels, int batch, int height, int width, T fill = T(0))
        : c(channels), n(batch), h(height), w(width),
          data(static_cast<std::size_t>(channels) * batch * height * width, fill)
    {
    }

    std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
    std::size_t cols() const { return static_cast<std::size_t>(n) * plane(); }
    std::size_t size() const { return data.size(); }
    bool empty() const { return data.empty(); }

    std::size_t index(int ci, int ni, int y, int x) const
    {
        return ((static_cast<std::size_t>(ci) * n + ni) * h + y) * w + x;
    }
    T &at(int ci, int ni, int y, int x) { return data[index(ci, ni, y, x)]; }
    T at(int ci, int ni, int y, int x) const { return data[index(ci, ni, y, x)]; }

    bool same_shape(const Tensor &o) const { return c == o.c && n == o.n && h == o.h && w == o.w; }
};

/// Samples [start, start + count) of `t`.
template <typename T>
Tensor<T> slice_batch(const Tensor<T> &t, int start, int count)
{
    if (start < 0 || count < 0 || start + count > t.n)
        throw Error(ErrorCode::Shape, "batch slice out of range");
    Tensor<T> out(t.c, count, t.h, t.w);
    const std::size_t p = t.plane();
    for (int ci = 0; ci < t.c; ++ci)
        for (int i = 0; i < count; ++i)
            std::copy_n(&t.data[t.index(ci, start + i, 0, 0)], p, &out.data[out.index(ci, i, 0, 0)]);
    return out;
}

/// Concatenation along the batch axis; empty operands are skipped.
template <typename T>
Tensor<T> concat_batch(const Tensor<T> &a, const Tensor<T> &b)
{
    if (a.n == 0)
        return b;
    if (b.n == 0)
        return a;
    if (a.c != b.c || a.h != b.h || a.w != b.w)
        throw Error(ErrorCode::Shape, "batch concat needs matching channel and spatial sizes");
    Tensor<T> out(a.c, a.n + b.n, a.h, a.w);
    const std::size_t p = a.plane();
    for (int ci = 0; ci < a.c; ++ci) {
        std::copy_n(&a.data[a.index(ci, 0, 0, 0)], p * a.n, &out.data[out.index(ci, 0, 0, 0)]);
        std::copy_n(&b.data[b.index(ci, 0, 0, 0)], p * b.n, &out.data[out.index(ci, a.n, 0, 0)]);
    }
    return out;
}

/// Concatenation along the channel axis.
template <typename T>
Tensor<T> concat_channels(const Tensor<T> &a, const Tensor<T> &b)
{
    if (a.n != b.n || a.h != b.h || a.w != b.w)
        throw Error(ErrorCode::Shape, "channel concat needs matching batch and spatial sizes");
    Tensor<T> out(a.c + b.c, a.n, a.h, a.w);
    std::copy(a.data.begin(), a.data.end(), out.data.begin());
    std::copy(b.data.begin(), b.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(a.size()));
    return out;
}

template <typename T>
void add_into(Tensor<T> &dst, const Tensor<T> &src)
{
    if (!dst.same_shape(src))
        throw Error(ErrorCode::Shape, "tensor add needs equal shapes");
    for (std::size_t i = 0; i < dst.size(); ++i)
        dst.data[i] += src.data[i];
}

} // namespace raw2raw::nn
