// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the raw2raw Project.

#pragma once

#include "raw2raw/nnmap/network.hpp"

namespace raw2raw::nn {

struct LossSwitches
{
    bool use_r = true;
    bool use_a = true;
    bool use_m = true;

    bool any() const { return use_r || use_a || use_m; }
    bool operator==(const LossSwitches &) const = default;
};

struct LossComponents
{
    double l_r = 0;
    double l_a = 0;
    double l_m = 0;
};

/// Sum of squared element differences, accumulated in double.
template <typename T>
double squared_distance(const Tensor<T> &a, const Tensor<T> &b);

/// (1/N) sum_n ||I_n - Î_n||^2 over a batch of N unpaired samples.
template <typename T>
double loss_r(const Tensor<T> &inputs, const Tensor<T> &reconstructions);

/// (1/N_p) sum_e sum_n ||X^e_A,n - X^e_B,n||^2.
template <typename T>
double loss_a(const LatentStack<T> &stack_a, const LatentStack<T> &stack_b);

/// (1/2N_p) sum_n ||I_A - Î_A||^2 + ||I_B - Î_B||^2.
template <typename T>
double loss_m(const Tensor<T> &mapped_a, const Tensor<T> &gt_a, const Tensor<T> &mapped_b, const Tensor<T> &gt_b);

/// Unweighted sum of the enabled terms; Error(Config) when none is enabled.
double total_loss(const LossComponents &c, const LossSwitches &s);

} // namespace raw2raw::nn
