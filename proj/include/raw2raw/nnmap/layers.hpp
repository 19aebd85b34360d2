// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the raw2raw Project.

#pragma once

#include <random>
#include <string>
#include <vector>

#include "raw2raw/nnmap/tensor.hpp"

namespace raw2raw::nn {

template <typename T>
struct Param
{
    std::string name;
    std::vector<int> shape;
    std::vector<T> value;
    std::vector<T> grad;

    std::size_t size() const { return value.size(); }
};

inline constexpr double kLeakySlope = 0.01;

enum class LayerKind {
    Conv3x3,   // same padding, stride 1
    Down2x2,   // kernel 2, stride 2
    Up2x2,     // transposed, kernel 2, stride 2
};

/// One learned linear layer. Weights are row-major:
///   Conv3x3: [out][in * 9], Down2x2: [out][in * 4], Up2x2: [out * 4][in].
template <typename T>
struct Layer
{
    LayerKind kind = LayerKind::Conv3x3;
    int in = 0;
    int out = 0;
    Param<T> weight;
    Param<T> bias;

    Layer() = default;
    Layer(LayerKind k, int in_ch, int out_ch, const std::string &name);

    /// He-normal weights, zero bias.
    void init(std::mt19937_64 &rng);

    Tensor<T> forward(const Tensor<T> &x) const;
    /// Accumulates weight/bias gradients; returns dL/dx when `need_input_grad`.
    Tensor<T> backward(const Tensor<T> &x, const Tensor<T> &dy, bool need_input_grad);
};

template <typename T>
void leaky_relu_inplace(Tensor<T> &t);

/// dy *= f'(x), using the activation's output (same sign as its input).
template <typename T>
void leaky_relu_backward_inplace(Tensor<T> &dy, const Tensor<T> &activated);

} // namespace raw2raw::nn
