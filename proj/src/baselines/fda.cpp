// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the raw2raw Project.

#include <cmath>
#include <complex>
#include <mutex>

#include <fftw3.h>

#include "raw2raw/baselines.hpp"

namespace raw2raw::baselines {

namespace {

// FFTW planning is not thread safe.
std::mutex &plan_mutex()
{
    static std::mutex m;
    return m;
}

class Dft2d
{
public:
    Dft2d(int h, int w) : h_(h), w_(w)
    {
        buf_ = fftw_alloc_complex(static_cast<std::size_t>(h) * w);
        std::lock_guard lock(plan_mutex());
        fwd_ = fftw_plan_dft_2d(h, w, buf_, buf_, FFTW_FORWARD, FFTW_ESTIMATE);
        inv_ = fftw_plan_dft_2d(h, w, buf_, buf_, FFTW_BACKWARD, FFTW_ESTIMATE);
    }
    ~Dft2d()
    {
        std::lock_guard lock(plan_mutex());
        fftw_destroy_plan(fwd_);
        fftw_destroy_plan(inv_);
        fftw_free(buf_);
    }
    Dft2d(const Dft2d &) = delete;
    Dft2d &operator=(const Dft2d &) = delete;

    std::vector<std::complex<double>> forward(const std::vector<double> &x)
    {
        for (std::size_t i = 0; i < x.size(); ++i) {
            buf_[i][0] = x[i];
            buf_[i][1] = 0.0;
        }
        fftw_execute(fwd_);
        std::vector<std::complex<double>> out(x.size());
        for (std::size_t i = 0; i < x.size(); ++i)
            out[i] = {buf_[i][0], buf_[i][1]};
        return out;
    }

    std::vector<double> inverse_real(const std::vector<std::complex<double>> &f)
    {
        for (std::size_t i = 0; i < f.size(); ++i) {
            buf_[i][0] = f[i].real();
            buf_[i][1] = f[i].imag();
        }
        fftw_execute(inv_);
        const double scale = 1.0 / (static_cast<double>(h_) * w_);
        std::vector<double> out(f.size());
        for (std::size_t i = 0; i < f.size(); ++i)
            out[i] = buf_[i][0] * scale;
        return out;
    }

private:
    int h_, w_;
    fftw_complex *buf_ = nullptr;
    fftw_plan fwd_ = nullptr, inv_ = nullptr;
};

int signed_index(int k, int n)
{
    return k <= n / 2 ? k : k - n;
}

} // namespace

void FdaConfig::validate() const
{
    if (!(beta >= 0.0 && beta <= 0.5))
        throw Error(ErrorCode::Config, "FDA beta must lie in [0, 0.5]");
}

std::vector<double> fda_swap_plane(const std::vector<double> &src, const std::vector<double> &target, int h, int w,
                                   double beta)
{
    const std::size_t n = static_cast<std::size_t>(h) * w;
    if (src.size() != n || target.size() != n)
        throw Error(ErrorCode::Shape, "FDA planes must be h x w");
    const int b = static_cast<int>(std::floor(beta * std::min(h, w)));
    if (b == 0)
        return src;
    Dft2d dft(h, w);
    auto fs = dft.forward(src);
    const auto ft = dft.forward(target);
    for (int ky = 0; ky < h; ++ky) {
        if (std::abs(signed_index(ky, h)) >= b)
            continue;
        for (int kx = 0; kx < w; ++kx) {
            if (std::abs(signed_index(kx, w)) >= b)
                continue;
            const std::size_t i = static_cast<std::size_t>(ky) * w + kx;
            const double amp = std::abs(ft[i]);
            const double phase = std::abs(fs[i]) > 0.0 ? std::arg(fs[i]) : 0.0;
            fs[i] = std::polar(amp, phase);
        }
    }
    return dft.inverse_real(fs);
}

PackedImage resize_bilinear(const PackedImage &img, int height, int width)
{
    if (height < 1 || width < 1 || img.height < 1 || img.width < 1)
        throw Error(ErrorCode::Shape, "cannot resize an empty image");
    if (height == img.height && width == img.width)
        return img;
    PackedImage out(height, width, img.channels);
    out.camera_id = img.camera_id;
    const double sy = static_cast<double>(img.height) / height;
    const double sx = static_cast<double>(img.width) / width;
    for (int y = 0; y < height; ++y) {
        const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, img.height - 1.0);
        const int y0 = static_cast<int>(fy);
        const int y1 = std::min(y0 + 1, img.height - 1);
        const double ty = fy - y0;
        for (int x = 0; x < width; ++x) {
            const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, img.width - 1.0);
            const int x0 = static_cast<int>(fx);
            const int x1 = std::min(x0 + 1, img.width - 1);
            const double tx = fx - x0;
            for (int c = 0; c < img.channels; ++c) {
                const double top = (1 - tx) * img.at(y0, x0, c) + tx * img.at(y0, x1, c);
                const double bot = (1 - tx) * img.at(y1, x0, c) + tx * img.at(y1, x1, c);
                out.at(y, x, c) = static_cast<float>((1 - ty) * top + ty * bot);
            }
        }
    }
    return out;
}

PackedImage fda_map(const PackedImage &src, const PackedImage &target, const FdaConfig &cfg)
{
    cfg.validate();
    if (src.channels != target.channels)
        throw Error(ErrorCode::Shape, "FDA source and target differ in channel count");
    const PackedImage tgt = resize_bilinear(target, src.height, src.width);
    const int h = src.height, w = src.width;
    PackedImage out(h, w, src.channels);
    out.camera_id = target.camera_id;
    std::vector<double> ps(static_cast<std::size_t>(h) * w), pt(ps.size());
    for (int c = 0; c < src.channels; ++c) {
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                ps[static_cast<std::size_t>(y) * w + x] = src.at(y, x, c);
                pt[static_cast<std::size_t>(y) * w + x] = tgt.at(y, x, c);
            }
        const auto r = fda_swap_plane(ps, pt, h, w, cfg.beta);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                out.at(y, x, c) = static_cast<float>(std::clamp(r[static_cast<std::size_t>(y) * w + x], 0.0, 1.0));
    }
    return out;
}

eval::MetricsReport fda_run(std::span<const PackedImage> target_anchors, std::span<const TestPair> tests,
                            const FdaConfig &cfg, const RunOptions &opt)
{
    cfg.validate();
    if (target_anchors.empty())
        throw Error(ErrorCode::Config, "FDA needs at least one target-camera anchor image");
    eval::MetricsReport rep;
    rep.method = kLabelFda;
    rep.direction = std::string(to_string(opt.direction));
    rep.ssim_params = opt.ssim;
    for (std::size_t i = 0; i < target_anchors.size(); ++i) {
        const PackedImage &target = target_anchors[i];
        rep.rows.push_back(mean_row(tests, opt, "anchor" + std::to_string(i),
                                    [&](const PackedImage &img) { return fda_map(img, target, cfg); }));
    }
    eval::aggregate(rep);
    return rep;
}

} // namespace raw2raw::baselines
