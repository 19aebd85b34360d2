// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the raw2raw Project.

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "raw2raw/error.hpp"
#include "raw2raw/image.hpp"

namespace raw2raw {

enum class AnnotationStatus { Draft, Committed };

/// Corresponding homogeneous squares picked in the two cameras' images.
struct RegionCorrespondence
{
    Patch patch_a;
    Patch patch_b;
    bool operator==(const RegionCorrespondence &) const = default;
};

/// Human patch correspondences for one scene pair. Chart patches are
/// matched by position in the two lists. Coordinates are in packed image
/// space of the chart-bearing frames.
struct AnnotationRecord
{
    std::string pair_id;
    std::vector<LabeledPatch> chart_a;
    std::vector<LabeledPatch> chart_b;
    std::vector<RegionCorrespondence> regions;
    AnnotationStatus status = AnnotationStatus::Draft;
    std::optional<double> residual_rms;
    std::string content_hash;

    std::string to_json() const;
    static AnnotationRecord from_json(const std::string &text);

    /// FNV-1a over the canonical serialization of pair id, chart lists and
    /// regions; status and stored results are excluded.
    std::string compute_hash() const;
};

} // namespace raw2raw
