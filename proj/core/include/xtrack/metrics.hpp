// Copyright (c) 2026 The xtrack Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "xtrack/head.hpp"

namespace xtrack {

// Intersection-over-union of two center-format boxes. Non-positive extents
// contribute zero area; disjoint or empty pairs give exactly 0.
double iou(const BBox& a, const BBox& b);

double center_distance(const BBox& a, const BBox& b);

struct FrameScore {
    double iou = 0.0;
    double center_err = 0.0;
};

struct EvalReport {
    double sr = 0.0;
    double pr = 0.0;
    std::vector<FrameScore> per_frame;
};

// Success rate: mean over the 51 overlap thresholds {0, 0.02, ..., 1.0} of
// the fraction of frames whose IoU is strictly above the threshold, so a
// perfect track scores 50/51 and a fully disjoint one exactly 0. Precision
// rate: fraction of frames whose center error is <= radius (pixels).
// Throws AlignmentError on length mismatch, DomainError on empty input.
EvalReport evaluate(const std::vector<BBox>& pred, const std::vector<BBox>& gt,
                    double radius = 20.0);

// {"sr": ..., "pr": ..., "per_frame": [{"iou": ..., "center_err": ...}, ...]}
std::string report_to_json(const EvalReport& report);

}  // namespace xtrack
