// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the raw2raw Project.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "raw2raw/error.hpp"
#include "raw2raw/evalkit.hpp"

namespace raw2raw::eval {

namespace {

MetricSummary summarize(const std::vector<double> &v)
{
    MetricSummary s;
    if (v.empty())
        return s;
    for (double x : v)
        s.mean += x;
    s.mean /= static_cast<double>(v.size());
    if (v.size() > 1) {
        double ss = 0;
        for (double x : v)
            ss += (x - s.mean) * (x - s.mean);
        s.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
    }
    return s;
}

double capped(double psnr) { return std::isinf(psnr) && psnr > 0 ? kPsnrCap : std::min(psnr, kPsnrCap); }

std::string fmt(const char *f, double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

std::string psnr_text(double v) { return std::isinf(v) ? std::string("inf") : fmt("%.2f", v); }

std::string pad(std::string s, std::size_t width)
{
    // Column widths count code points so the arrows line up.
    std::size_t cps = 0;
    for (unsigned char ch : s)
        cps += (ch & 0xC0) != 0x80;
    if (cps < width)
        s.append(width - cps, ' ');
    return s;
}

} // namespace

void aggregate(MetricsReport &r)
{
    std::vector<double> p, s, m, d;
    for (const auto &row : r.rows) {
        p.push_back(capped(row.psnr));
        s.push_back(row.ssim);
        m.push_back(row.mae);
        d.push_back(row.delta_e);
    }
    r.psnr = summarize(p);
    r.ssim = summarize(s);
    r.mae = summarize(m);
    r.delta_e = summarize(d);
}

std::string MetricsReport::to_table() const
{
    std::ostringstream out;
    out << "method: " << method << "  direction: " << direction << "\n";
    out << fmt("ssim: K1=%g", ssim_params.k1) << fmt(" K2=%g", ssim_params.k2)
        << " window=" << ssim_params.window << "x" << ssim_params.window << fmt(" gaussian sigma=%g", ssim_params.sigma)
        << "\n";

    std::size_t name_w = std::max<std::size_t>(method.size(), 6);
    for (const auto &row : rows)
        name_w = std::max(name_w, row.name.size());
    name_w += 2;
    constexpr std::size_t col = 18;

    out << pad("", name_w) << pad("PSNR↑", col) << pad("SSIM↑", col) << pad("MAE↓", col) << "ΔE↓\n";
    for (const auto &row : rows) {
        out << pad(row.name, name_w) << pad(psnr_text(row.psnr), col) << pad(fmt("%.3f", row.ssim), col)
            << pad(fmt("%.4f", row.mae), col) << fmt("%.2f", row.delta_e) << "\n";
    }
    out << pad(method, name_w) << pad(fmt("%.2f", psnr.mean) + fmt(" ± %.2f", psnr.std), col)
        << pad(fmt("%.3f", ssim.mean) + fmt(" ± %.3f", ssim.std), col)
        << pad(fmt("%.4f", mae.mean) + fmt(" ± %.4f", mae.std), col)
        << fmt("%.2f", delta_e.mean) + fmt(" ± %.2f", delta_e.std) << "\n";
    return out.str();
}

std::string MetricsReport::to_csv() const
{
    std::ostringstream out;
    out << "method,direction,name,psnr,ssim,mae,delta_e\n";
    auto line = [&](const std::string &name, double p, double s, double m, double d) {
        out << method << "," << direction << "," << name << "," << fmt("%.6f", p) << "," << fmt("%.6f", s) << ","
            << fmt("%.6f", m) << "," << fmt("%.6f", d) << "\n";
    };
    for (const auto &row : rows)
        line(row.name, capped(row.psnr), row.ssim, row.mae, row.delta_e);
    line("mean", psnr.mean, ssim.mean, mae.mean, delta_e.mean);
    line("std", psnr.std, ssim.std, mae.std, delta_e.std);
    return out.str();
}

Vec3 ground_truth_illuminant(const EvalItem &item)
{
    if (item.gt_illuminant) {
        const Vec3 &v = *item.gt_illuminant;
        const double n = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
        if (!(n > 0))
            throw Error(ErrorCode::DegenerateIlluminant, "metadata illuminant has zero norm");
        return {v[0] / n, v[1] / n, v[2] / n};
    }
    return estimate_illuminant(item.ground_truth, item.gt_achromatic);
}

MetricRow evaluate_pair(const EvalItem &item, const CameraColorProfile &profile, IlluminantPolicy policy,
                        const SsimParams &ssim_params)
{
    if (!item.mapped.same_shape(item.ground_truth))
        throw Error(ErrorCode::Shape, "mapped and ground-truth images differ in shape for '" + item.name + "'");
    MetricRow row;
    row.name = item.name;
    row.psnr = psnr(item.mapped, item.ground_truth);
    row.ssim = ssim(item.mapped, item.ground_truth, ssim_params);
    row.mae = mae(item.mapped, item.ground_truth);

    Vec3 gt_illum, mapped_illum;
    switch (policy) {
    case IlluminantPolicy::SharedGroundTruth:
        gt_illum = ground_truth_illuminant(item);
        mapped_illum = gt_illum;
        break;
    case IlluminantPolicy::PerImageGrayWorld:
        gt_illum = estimate_illuminant(item.ground_truth);
        mapped_illum = estimate_illuminant(item.mapped);
        break;
    case IlluminantPolicy::MappedGrayWorld:
        gt_illum = ground_truth_illuminant(item);
        mapped_illum = estimate_illuminant(item.mapped);
        break;
    }
    row.delta_e = delta_e_2000(raw_to_lab(item.mapped, mapped_illum, profile),
                               raw_to_lab(item.ground_truth, gt_illum, profile));
    return row;
}

MetricsReport evaluate(std::span<const EvalItem> items, const CameraColorProfile &profile, IlluminantPolicy policy,
                       std::string method, std::string direction, const SsimParams &ssim_params)
{
    MetricsReport r;
    r.method = std::move(method);
    r.direction = std::move(direction);
    r.ssim_params = ssim_params;
    for (const auto &item : items)
        r.rows.push_back(evaluate_pair(item, profile, policy, ssim_params));
    aggregate(r);
    return r;
}

} // namespace raw2raw::eval
