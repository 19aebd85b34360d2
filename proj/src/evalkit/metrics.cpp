// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the raw2raw Project.

#include <algorithm>
#include <cmath>

#include "raw2raw/error.hpp"
#include "raw2raw/evalkit.hpp"

namespace raw2raw::eval {

namespace {

void require_same_shape(const PackedImage &x, const PackedImage &y)
{
    if (!x.same_shape(y) || x.data.empty())
        throw Error(ErrorCode::Shape, "metric inputs must have equal, non-empty shapes");
}

std::vector<double> gaussian_kernel(int size, double sigma)
{
    std::vector<double> k(size);
    const int r = size / 2;
    double sum = 0;
    for (int i = 0; i < size; ++i) {
        const double d = i - r;
        k[i] = std::exp(-d * d / (2 * sigma * sigma));
        sum += k[i];
    }
    for (auto &v : k)
        v /= sum;
    return k;
}

// Valid-region separable filtering of one plane.
std::vector<double> filter_valid(const std::vector<double> &plane, int h, int w, const std::vector<double> &k)
{
    const int n = static_cast<int>(k.size());
    const int ow = w - n + 1;
    const int oh = h - n + 1;
    std::vector<double> tmp(static_cast<std::size_t>(h) * ow);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < ow; ++x) {
            double s = 0;
            for (int i = 0; i < n; ++i)
                s += k[i] * plane[static_cast<std::size_t>(y) * w + x + i];
            tmp[static_cast<std::size_t>(y) * ow + x] = s;
        }
    std::vector<double> out(static_cast<std::size_t>(oh) * ow);
    for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x) {
            double s = 0;
            for (int i = 0; i < n; ++i)
                s += k[i] * tmp[static_cast<std::size_t>(y + i) * ow + x];
            out[static_cast<std::size_t>(y) * ow + x] = s;
        }
    return out;
}

} // namespace

double psnr(const PackedImage &x, const PackedImage &y)
{
    require_same_shape(x, y);
    double sse = 0;
    for (std::size_t i = 0; i < x.data.size(); ++i) {
        const double d = double(x.data[i]) - double(y.data[i]);
        sse += d * d;
    }
    const double mse = sse / static_cast<double>(x.data.size());
    if (mse == 0)
        return kPsnrInfinity;
    return 10.0 * std::log10(1.0 / mse);
}

double mae(const PackedImage &x, const PackedImage &y)
{
    require_same_shape(x, y);
    double s = 0;
    for (std::size_t i = 0; i < x.data.size(); ++i)
        s += std::abs(double(x.data[i]) - double(y.data[i]));
    return s / static_cast<double>(x.data.size());
}

double ssim(const PackedImage &x, const PackedImage &y, const SsimParams &p)
{
    require_same_shape(x, y);
    int win = std::min({p.window, x.height, x.width});
    if (win % 2 == 0)
        --win;
    const auto k = gaussian_kernel(win, p.sigma);
    const double c1 = (p.k1 * p.peak) * (p.k1 * p.peak);
    const double c2 = (p.k2 * p.peak) * (p.k2 * p.peak);
    const int h = x.height, w = x.width;
    const std::size_t n = x.pixel_count();

    double total = 0;
    for (int c = 0; c < x.channels; ++c) {
        std::vector<double> a(n), b(n), aa(n), bb(n), ab(n);
        for (std::size_t i = 0; i < n; ++i) {
            a[i] = x.data[i * x.channels + c];
            b[i] = y.data[i * y.channels + c];
            aa[i] = a[i] * a[i];
            bb[i] = b[i] * b[i];
            ab[i] = a[i] * b[i];
        }
        const auto mu_a = filter_valid(a, h, w, k);
        const auto mu_b = filter_valid(b, h, w, k);
        const auto e_aa = filter_valid(aa, h, w, k);
        const auto e_bb = filter_valid(bb, h, w, k);
        const auto e_ab = filter_valid(ab, h, w, k);
        double sum = 0;
        for (std::size_t i = 0; i < mu_a.size(); ++i) {
            const double va = e_aa[i] - mu_a[i] * mu_a[i];
            const double vb = e_bb[i] - mu_b[i] * mu_b[i];
            const double cov = e_ab[i] - mu_a[i] * mu_b[i];
            sum += ((2 * mu_a[i] * mu_b[i] + c1) * (2 * cov + c2)) /
                   ((mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + c1) * (va + vb + c2));
        }
        total += sum / static_cast<double>(mu_a.size());
    }
    return total / x.channels;
}

} // namespace raw2raw::eval
