// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the raw2raw Project.

#include "raw2raw/nnmap/losses.hpp"

namespace raw2raw::nn {

template <typename T>
double squared_distance(const Tensor<T> &a, const Tensor<T> &b)
{
    if (!a.same_shape(b))
        throw Error(ErrorCode::Shape, "loss operands differ in shape");
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = static_cast<double>(a.data[i]) - static_cast<double>(b.data[i]);
        s += d * d;
    }
    return s;
}

template <typename T>
double loss_r(const Tensor<T> &inputs, const Tensor<T> &reconstructions)
{
    const double s = squared_distance(inputs, reconstructions);
    return inputs.n == 0 ? 0.0 : s / inputs.n;
}

template <typename T>
double loss_a(const LatentStack<T> &stack_a, const LatentStack<T> &stack_b)
{
    if (stack_a.size() != stack_b.size())
        throw Error(ErrorCode::Arch, "latent stacks have different block counts");
    if (stack_a.empty())
        return 0.0;
    double s = 0;
    for (std::size_t e = 0; e < stack_a.size(); ++e) {
        if (stack_a[e].n != stack_a[0].n)
            throw Error(ErrorCode::Shape, "latent blocks disagree on batch size");
        s += squared_distance(stack_a[e], stack_b[e]);
    }
    const int n = stack_a[0].n;
    return n == 0 ? 0.0 : s / n;
}

template <typename T>
double loss_m(const Tensor<T> &mapped_a, const Tensor<T> &gt_a, const Tensor<T> &mapped_b, const Tensor<T> &gt_b)
{
    const double sa = squared_distance(mapped_a, gt_a);
    const double sb = squared_distance(mapped_b, gt_b);
    if (mapped_a.n != mapped_b.n)
        throw Error(ErrorCode::Shape, "mapping batches differ in size");
    const int n = mapped_a.n;
    return n == 0 ? 0.0 : (sa + sb) / (2.0 * n);
}

double total_loss(const LossComponents &c, const LossSwitches &s)
{
    if (!s.any())
        throw Error(ErrorCode::Config, "all loss terms are disabled");
    double l = 0;
    if (s.use_r)
        l += c.l_r;
    if (s.use_a)
        l += c.l_a;
    if (s.use_m)
        l += c.l_m;
    return l;
}

template double squared_distance(const Tensor<float> &, const Tensor<float> &);
template double squared_distance(const Tensor<double> &, const Tensor<double> &);
template double loss_r(const Tensor<float> &, const Tensor<float> &);
template double loss_r(const Tensor<double> &, const Tensor<double> &);
template double loss_a(const LatentStack<float> &, const LatentStack<float> &);
template double loss_a(const LatentStack<double> &, const LatentStack<double> &);
template double loss_m(const Tensor<float> &, const Tensor<float> &, const Tensor<float> &, const Tensor<float> &);
template double loss_m(const Tensor<double> &, const Tensor<double> &, const Tensor<double> &,
                       const Tensor<double> &);

} // namespace raw2raw::nn
