// Copyright (c) 2026 The xtrack Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <utility>
#include <vector>

#include "xtrack/fusion.hpp"
#include "xtrack/tensor.hpp"

namespace xtrack {

// Axis-aligned box, center + extent, normalized to [0,1] relative to the
// search region.
struct BBox {
    double cx = 0.0, cy = 0.0, w = 0.0, h = 0.0;
};

struct HeadOutput {
    Tensor cls_map;     // [hs, ws], sigmoid scores
    Tensor offset_map;  // [2, hs, ws], sub-cell (x, y) offsets
    Tensor size_map;    // [2, hs, ws], normalized (w, h)
};

struct LossWeights {
    double alpha = 2.0;  // giou term
    double beta = 5.0;   // l1 term
};

// One conv stage: 3x3 same-padding conv, per-channel norm, relu.
struct ConvStage {
    Tensor w, b;          // [cout, cin, 3, 3], [cout]
    Tensor gamma, beta;   // [cout]
};

struct HeadTower {
    std::vector<ConvStage> stages;
    Tensor w_out, b_out;  // 1x1 conv [out_ch, c_last, 1, 1], [out_ch]
};

struct HeadWeights {
    HeadTower cls, offset, size;

    static HeadWeights init(Rng& rng, int d_model);
};

// Reshapes the search tokens of `fused` to a channel-major grid and runs the
// three towers. With search_grid == (0,0) all tokens are treated as search
// tokens and the grid must be square.
HeadOutput head_forward(const FusedFeature& fused, const HeadWeights& weights);

// Argmax cell of the score map as (row, col); ties take the lowest flat index.
std::pair<int, int> peak_cell(const Tensor& cls_map);

// Center-based decoding at the score peak.
BBox decode_bbox(const HeadOutput& out);

// Gaussian-splatted target with a unit peak at the ground-truth cell;
// sigma = max(1, box diagonal in cells / 6).
Tensor gaussian_target(const BBox& gt, int hs, int ws);

// Penalty-reduced pixelwise focal loss, normalized by the unit-peak count.
Tensor focal_loss(const Tensor& cls_map, const Tensor& target_map);

// 1 - GIoU for a differentiable (cx,cy,w,h) prediction against a fixed box.
Tensor giou_loss(const Tensor& pred, const BBox& gt);
double giou_loss(const BBox& pred, const BBox& gt);

// L_cls + alpha*L_iou + beta*L_1, regression terms taken at the ground-truth
// cell.
Tensor total_loss(const HeadOutput& out, const BBox& gt, const LossWeights& weights);

}  // namespace xtrack
