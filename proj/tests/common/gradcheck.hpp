// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the raw2raw Project.

#pragma once

#include <algorithm>
#include <cmath>
#include <random>

#include "raw2raw/nnmap/losses.hpp"
#include "raw2raw/nnmap/network.hpp"
#include "raw2raw/nnmap/trainer.hpp"

namespace raw2raw::test {

using XReal = long double;

template <typename Dst, typename Src>
nn::Tensor<Dst> cast_tensor(const nn::Tensor<Src> &t)
{
    nn::Tensor<Dst> out(t.c, t.n, t.h, t.w);
    for (std::size_t i = 0; i < t.size(); ++i)
        out.data[i] = static_cast<Dst>(t.data[i]);
    return out;
}

inline XReal sq_sum(const nn::Tensor<XReal> &a, const nn::Tensor<XReal> &b)
{
    XReal s = 0;
    for (int n = 0; n < a.n; ++n)
        for (int c = 0; c < a.c; ++c)
            for (int y = 0; y < a.h; ++y)
                for (int x = 0; x < a.w; ++x) {
                    const XReal d = a.at(c, n, y, x) - b.at(c, n, y, x);
                    s += d * d;
                }
    return s;
}

/// Full objective written out from its definition, in extended precision:
/// reconstruction of unpaired images through their own network, latent
/// distance of anchor pairs, and anchor mapping through the swapped decoders.
inline XReal reference_objective(const nn::DualNetwork<XReal> &net, const nn::Batch<XReal> &b,
                                 const nn::LossSwitches &sw)
{
    XReal total = 0;
    const int nu = b.unpaired_a.n + b.unpaired_b.n;
    if (sw.use_r && nu > 0) {
        XReal s = 0;
        if (b.unpaired_a.n)
            s += sq_sum(net.decoder_a.forward(net.encoder_a.forward(b.unpaired_a)), b.unpaired_a);
        if (b.unpaired_b.n)
            s += sq_sum(net.decoder_b.forward(net.encoder_b.forward(b.unpaired_b)), b.unpaired_b);
        total += s / nu;
    }
    const int np = b.anchor_a.n;
    if (np > 0 && (sw.use_a || sw.use_m)) {
        const auto la = net.encoder_a.forward(b.anchor_a);
        const auto lb = net.encoder_b.forward(b.anchor_b);
        if (sw.use_a) {
            XReal s = 0;
            for (std::size_t e = 0; e < la.size(); ++e)
                s += sq_sum(la[e], lb[e]);
            total += s / np;
        }
        if (sw.use_m)
            total += (sq_sum(net.decoder_a.forward(lb), b.anchor_a) + sq_sum(net.decoder_b.forward(la), b.anchor_b)) /
                     (2 * np);
    }
    return total;
}

struct GradCheckResult
{
    int probes = 0;
    int failures = 0;
    double worst = 0;
};

struct GradCheckOptions
{
    nn::ArchitectureSpec arch;
    nn::LossSwitches switches;
    std::uint64_t seed = 1;
    int probes = 100;
    int unpaired = 2;
    int anchors = 2;
    int patch = 16;
    /// Central-difference step.
    double step = 1e-6;
    double tolerance = 1e-3;
    /// Denominator floor of the relative error.
    double floor = 1e-8;
};

/// Analytic gradients of the double-precision network against central
/// differences of reference_objective at randomly chosen parameters.
inline GradCheckResult gradient_check(const GradCheckOptions &o)
{
    std::mt19937_64 rng(o.seed);
    nn::DualNetwork<double> net(o.arch);
    net.init(o.seed);
    // Nonzero biases so that their gradients are exercised too.
    for (auto *p : net.params())
        if (p->shape.size() == 1)
            for (auto &v : p->value)
                v = std::uniform_real_distribution<double>(-0.1, 0.1)(rng);
    auto image = [&](int n) {
        std::uniform_real_distribution<double> u(0.0, 1.0);
        nn::Tensor<double> t(o.arch.in_channels, n, o.patch, o.patch);
        for (auto &v : t.data)
            v = u(rng);
        return t;
    };
    nn::Batch<double> batch;
    batch.unpaired_a = image(o.unpaired);
    batch.unpaired_b = image(o.unpaired);
    batch.anchor_a = image(o.anchors);
    batch.anchor_b = image(o.anchors);
    net.zero_grad();
    nn::forward_backward(net, batch, o.switches, true);

    nn::Batch<XReal> xb;
    xb.unpaired_a = cast_tensor<XReal>(batch.unpaired_a);
    xb.unpaired_b = cast_tensor<XReal>(batch.unpaired_b);
    xb.anchor_a = cast_tensor<XReal>(batch.anchor_a);
    xb.anchor_b = cast_tensor<XReal>(batch.anchor_b);
    nn::DualNetwork<XReal> xnet = nn::convert<XReal>(net);

    const auto params = net.params();
    const auto xparams = xnet.params();
    std::size_t total = 0;
    for (const auto *p : params)
        total += p->size();
    std::uniform_int_distribution<std::size_t> pick(0, total - 1);
    GradCheckResult r;
    for (int k = 0; k < o.probes; ++k) {
        std::size_t idx = pick(rng);
        std::size_t which = 0;
        while (idx >= params[which]->size())
            idx -= params[which++]->size();
        XReal &theta = xparams[which]->value[idx];
        const XReal saved = theta;
        theta = saved + o.step;
        const XReal lp = reference_objective(xnet, xb, o.switches);
        theta = saved - o.step;
        const XReal lm = reference_objective(xnet, xb, o.switches);
        theta = saved;
        const double numeric = static_cast<double>((lp - lm) / (2 * static_cast<XReal>(o.step)));
        const double analytic = params[which]->grad[idx];
        const double rel =
            std::abs(numeric - analytic) / std::max({std::abs(numeric), std::abs(analytic), o.floor});
        r.worst = std::max(r.worst, rel);
        r.failures += rel > o.tolerance;
        ++r.probes;
    }
    return r;
}

} // namespace raw2raw::test
