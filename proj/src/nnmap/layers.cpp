// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the raw2raw Project.

#include "raw2raw/nnmap/layers.hpp"

#include <Eigen/Core>
#include <cmath>

namespace raw2raw::nn {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapR = Eigen::Map<RowMat<T>>;
template <typename T>
using CMapR = Eigen::Map<const RowMat<T>>;

// Columns of (in * 9) x (N * H * W), zero outside the image.
template <typename T>
void im2col3(const Tensor<T> &x, std::vector<T> &cols)
{
    const int H = x.h, W = x.w;
    const std::size_t ncols = x.cols();
    cols.assign(static_cast<std::size_t>(x.c) * 9 * ncols, T(0));
    for (int ci = 0; ci < x.c; ++ci)
        for (int ky = 0; ky < 3; ++ky)
            for (int kx = 0; kx < 3; ++kx) {
                T *row = &cols[(static_cast<std::size_t>(ci) * 9 + ky * 3 + kx) * ncols];
                const int dy = ky - 1, dx = kx - 1;
                const int x0 = std::max(0, -dx), x1 = std::min(W, W - dx);
                for (int n = 0; n < x.n; ++n)
                    for (int y = 0; y < H; ++y) {
                        const int sy = y + dy;
                        if (sy < 0 || sy >= H)
                            continue;
                        const T *src = &x.data[x.index(ci, n, sy, 0)];
                        T *dst = row + (static_cast<std::size_t>(n) * H + y) * W;
                        for (int xx = x0; xx < x1; ++xx)
                            dst[xx] = src[xx + dx];
                    }
            }
}

template <typename T>
void col2im3(const std::vector<T> &cols, Tensor<T> &dx)
{
    const int H = dx.h, W = dx.w;
    const std::size_t ncols = dx.cols();
    std::fill(dx.data.begin(), dx.data.end(), T(0));
    for (int ci = 0; ci < dx.c; ++ci)
        for (int ky = 0; ky < 3; ++ky)
            for (int kx = 0; kx < 3; ++kx) {
                const T *row = &cols[(static_cast<std::size_t>(ci) * 9 + ky * 3 + kx) * ncols];
                const int dy = ky - 1, ddx = kx - 1;
                const int x0 = std::max(0, -ddx), x1 = std::min(W, W - ddx);
                for (int n = 0; n < dx.n; ++n)
                    for (int y = 0; y < H; ++y) {
                        const int sy = y + dy;
                        if (sy < 0 || sy >= H)
                            continue;
                        T *dst = &dx.data[dx.index(ci, n, sy, 0)];
                        const T *src = row + (static_cast<std::size_t>(n) * H + y) * W;
                        for (int xx = x0; xx < x1; ++xx)
                            dst[xx + ddx] += src[xx];
                    }
            }
}

// Non-overlapping 2x2 blocks: (in * 4) x (N * H/2 * W/2).
template <typename T>
void gather2(const Tensor<T> &x, std::vector<T> &cols)
{
    const int Ho = x.h / 2, Wo = x.w / 2;
    const std::size_t ncols = static_cast<std::size_t>(x.n) * Ho * Wo;
    cols.resize(static_cast<std::size_t>(x.c) * 4 * ncols);
    for (int ci = 0; ci < x.c; ++ci)
        for (int k = 0; k < 4; ++k) {
            const int oy = k / 2, ox = k % 2;
            T *row = &cols[(static_cast<std::size_t>(ci) * 4 + k) * ncols];
            for (int n = 0; n < x.n; ++n)
                for (int i = 0; i < Ho; ++i) {
                    const T *src = &x.data[x.index(ci, n, 2 * i + oy, 0)];
                    T *dst = row + (static_cast<std::size_t>(n) * Ho + i) * Wo;
                    for (int j = 0; j < Wo; ++j)
                        dst[j] = src[2 * j + ox];
                }
        }
}

template <typename T>
void scatter2(const std::vector<T> &cols, Tensor<T> &x)
{
    const int Ho = x.h / 2, Wo = x.w / 2;
    const std::size_t ncols = static_cast<std::size_t>(x.n) * Ho * Wo;
    for (int ci = 0; ci < x.c; ++ci)
        for (int k = 0; k < 4; ++k) {
            const int oy = k / 2, ox = k % 2;
            const T *row = &cols[(static_cast<std::size_t>(ci) * 4 + k) * ncols];
            for (int n = 0; n < x.n; ++n)
                for (int i = 0; i < Ho; ++i) {
                    T *dst = &x.data[x.index(ci, n, 2 * i + oy, 0)];
                    const T *src = row + (static_cast<std::size_t>(n) * Ho + i) * Wo;
                    for (int j = 0; j < Wo; ++j)
                        dst[2 * j + ox] = src[j];
                }
        }
}

} // namespace

template <typename T>
Layer<T>::Layer(LayerKind k, int in_ch, int out_ch, const std::string &name) : kind(k), in(in_ch), out(out_ch)
{
    weight.name = name + ".weight";
    bias.name = name + ".bias";
    switch (kind) {
    case LayerKind::Conv3x3: weight.shape = {out, in * 9}; break;
    case LayerKind::Down2x2: weight.shape = {out, in * 4}; break;
    case LayerKind::Up2x2: weight.shape = {out * 4, in}; break;
    }
    bias.shape = {out};
    weight.value.assign(static_cast<std::size_t>(weight.shape[0]) * weight.shape[1], T(0));
    weight.grad.assign(weight.value.size(), T(0));
    bias.value.assign(out, T(0));
    bias.grad.assign(out, T(0));
}

template <typename T>
void Layer<T>::init(std::mt19937_64 &rng)
{
    const int fan_in = kind == LayerKind::Conv3x3 ? in * 9 : kind == LayerKind::Down2x2 ? in * 4 : in;
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / fan_in));
    for (auto &v : weight.value)
        v = static_cast<T>(dist(rng));
    std::fill(bias.value.begin(), bias.value.end(), T(0));
}

template <typename T>
Tensor<T> Layer<T>::forward(const Tensor<T> &x) const
{
    if (x.c != in)
        throw Error(ErrorCode::Shape, weight.name + ": expected " + std::to_string(in) + " input channels, got " +
                                          std::to_string(x.c));
    CMapR<T> Wm(weight.value.data(), weight.shape[0], weight.shape[1]);
    thread_local std::vector<T> cols;
    switch (kind) {
    case LayerKind::Conv3x3: {
        Tensor<T> y(out, x.n, x.h, x.w);
        im2col3(x, cols);
        const auto nc = static_cast<Eigen::Index>(x.cols());
        MapR<T> Y(y.data.data(), out, nc);
        Y.noalias() = Wm * CMapR<T>(cols.data(), in * 9, nc);
        for (int o = 0; o < out; ++o)
            Y.row(o).array() += bias.value[o];
        return y;
    }
    case LayerKind::Down2x2: {
        if (x.h % 2 || x.w % 2)
            throw Error(ErrorCode::Shape, weight.name + ": spatial size must be even");
        Tensor<T> y(out, x.n, x.h / 2, x.w / 2);
        gather2(x, cols);
        const auto nc = static_cast<Eigen::Index>(y.cols());
        MapR<T> Y(y.data.data(), out, nc);
        Y.noalias() = Wm * CMapR<T>(cols.data(), in * 4, nc);
        for (int o = 0; o < out; ++o)
            Y.row(o).array() += bias.value[o];
        return y;
    }
    case LayerKind::Up2x2: {
        Tensor<T> y(out, x.n, x.h * 2, x.w * 2);
        const auto nc = static_cast<Eigen::Index>(x.cols());
        cols.resize(static_cast<std::size_t>(out) * 4 * nc);
        MapR<T> Z(cols.data(), out * 4, nc);
        Z.noalias() = Wm * CMapR<T>(x.data.data(), in, nc);
        scatter2(cols, y);
        const std::size_t per_channel = y.cols();
        for (int o = 0; o < out; ++o) {
            T *p = &y.data[static_cast<std::size_t>(o) * per_channel];
            for (std::size_t i = 0; i < per_channel; ++i)
                p[i] += bias.value[o];
        }
        return y;
    }
    }
    return {};
}

template <typename T>
Tensor<T> Layer<T>::backward(const Tensor<T> &x, const Tensor<T> &dy, bool need_input_grad)
{
    CMapR<T> Wm(weight.value.data(), weight.shape[0], weight.shape[1]);
    MapR<T> dW(weight.grad.data(), weight.shape[0], weight.shape[1]);
    thread_local std::vector<T> cols;
    thread_local std::vector<T> dcols;
    Tensor<T> dx;
    switch (kind) {
    case LayerKind::Conv3x3:
    case LayerKind::Down2x2: {
        const int k = kind == LayerKind::Conv3x3 ? 9 : 4;
        if (kind == LayerKind::Conv3x3)
            im2col3(x, cols);
        else
            gather2(x, cols);
        const auto nc = static_cast<Eigen::Index>(dy.cols());
        CMapR<T> dY(dy.data.data(), out, nc);
        CMapR<T> C(cols.data(), in * k, nc);
        dW.noalias() += dY * C.transpose();
        for (int o = 0; o < out; ++o) {
            const T *row = &dy.data[static_cast<std::size_t>(o) * nc];
            T acc = 0;
            for (Eigen::Index i = 0; i < nc; ++i)
                acc += row[i];
            bias.grad[o] += acc;
        }
        if (need_input_grad) {
            dcols.resize(cols.size());
            MapR<T> dC(dcols.data(), in * k, nc);
            dC.noalias() = Wm.transpose() * dY;
            dx = Tensor<T>(x.c, x.n, x.h, x.w);
            if (kind == LayerKind::Conv3x3)
                col2im3(dcols, dx);
            else
                scatter2(dcols, dx);
        }
        return dx;
    }
    case LayerKind::Up2x2: {
        const auto nc = static_cast<Eigen::Index>(x.cols());
        gather2(dy, cols);
        CMapR<T> dZ(cols.data(), out * 4, nc);
        CMapR<T> X(x.data.data(), in, nc);
        dW.noalias() += dZ * X.transpose();
        const std::size_t per_channel = dy.cols();
        for (int o = 0; o < out; ++o) {
            const T *p = &dy.data[static_cast<std::size_t>(o) * per_channel];
            T s = 0;
            for (std::size_t i = 0; i < per_channel; ++i)
                s += p[i];
            bias.grad[o] += s;
        }
        if (need_input_grad) {
            dx = Tensor<T>(x.c, x.n, x.h, x.w);
            MapR<T> dX(dx.data.data(), in, nc);
            dX.noalias() = Wm.transpose() * dZ;
        }
        return dx;
    }
    }
    return dx;
}

template <typename T>
void leaky_relu_inplace(Tensor<T> &t)
{
    const T slope = static_cast<T>(kLeakySlope);
    for (auto &v : t.data)
        v = v > T(0) ? v : v * slope;
}

template <typename T>
void leaky_relu_backward_inplace(Tensor<T> &dy, const Tensor<T> &activated)
{
    const T slope = static_cast<T>(kLeakySlope);
    for (std::size_t i = 0; i < dy.size(); ++i)
        if (!(activated.data[i] > T(0)))
            dy.data[i] *= slope;
}

template struct Layer<float>;
template struct Layer<double>;
template void leaky_relu_inplace(Tensor<float> &);
template void leaky_relu_inplace(Tensor<double> &);
template void leaky_relu_backward_inplace(Tensor<float> &, const Tensor<float> &);
template void leaky_relu_backward_inplace(Tensor<double> &, const Tensor<double> &);
template struct Layer<long double>;
template void leaky_relu_inplace(Tensor<long double> &);
template void leaky_relu_backward_inplace(Tensor<long double> &, const Tensor<long double> &);

} // namespace raw2raw::nn
