// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the raw2raw Project.

#include <cstdint>
#include <cstdio>

#include "json.hpp"
#include "raw2raw/annotation.hpp"
#include "raw2raw/error.hpp"

namespace raw2raw {

using nlohmann::json;

namespace {

json patch_json(const Patch &p) { return {{"x", p.x}, {"y", p.y}, {"size", p.size}}; }

Patch patch_from(const json &j) { return {j.at("x").get<int>(), j.at("y").get<int>(), j.at("size").get<int>()}; }

json chart_json(const std::vector<LabeledPatch> &list)
{
    json out = json::array();
    for (const auto &lp : list) {
        json p = patch_json(lp.patch);
        p["label"] = lp.label;
        out.push_back(p);
    }
    return out;
}

std::vector<LabeledPatch> chart_from(const json &j)
{
    std::vector<LabeledPatch> out;
    for (const auto &p : j)
        out.push_back({patch_from(p), p.value("label", std::string())});
    return out;
}

json content_json(const AnnotationRecord &r)
{
    json regions = json::array();
    for (const auto &reg : r.regions)
        regions.push_back({{"patch_a", patch_json(reg.patch_a)}, {"patch_b", patch_json(reg.patch_b)}});
    return {{"pair_id", r.pair_id}, {"chart_a", chart_json(r.chart_a)}, {"chart_b", chart_json(r.chart_b)},
            {"regions", regions}};
}

} // namespace

std::string AnnotationRecord::compute_hash() const
{
    const std::string text = content_json(*this).dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string AnnotationRecord::to_json() const
{
    json j = content_json(*this);
    j["status"] = status == AnnotationStatus::Committed ? "COMMITTED" : "DRAFT";
    if (residual_rms)
        j["residual_rms"] = *residual_rms;
    if (!content_hash.empty())
        j["hash"] = content_hash;
    return j.dump(2) + "\n";
}

AnnotationRecord AnnotationRecord::from_json(const std::string &text)
{
    AnnotationRecord r;
    try {
        const json j = json::parse(text);
        r.pair_id = j.at("pair_id").get<std::string>();
        r.chart_a = chart_from(j.value("chart_a", json::array()));
        r.chart_b = chart_from(j.value("chart_b", json::array()));
        for (const auto &reg : j.value("regions", json::array()))
            r.regions.push_back({patch_from(reg.at("patch_a")), patch_from(reg.at("patch_b"))});
        const auto status = j.value("status", std::string("DRAFT"));
        if (status == "COMMITTED")
            r.status = AnnotationStatus::Committed;
        else if (status == "DRAFT")
            r.status = AnnotationStatus::Draft;
        else
            throw Error(ErrorCode::Metadata, "unknown annotation status '" + status + "'");
        if (j.contains("residual_rms"))
            r.residual_rms = j.at("residual_rms").get<double>();
        r.content_hash = j.value("hash", std::string());
    } catch (const json::exception &e) {
        throw Error(ErrorCode::Metadata, std::string("malformed annotation record: ") + e.what());
    }
    return r;
}

} // namespace raw2raw
