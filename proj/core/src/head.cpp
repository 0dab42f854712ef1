// Copyright (c) 2026 The xtrack Authors
// SPDX-License-Identifier: Apache-2.0

#include "xtrack/head.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "xtrack/error.hpp"
#include "xtrack/ops.hpp"

namespace xtrack {

namespace {

constexpr double kProbEps = 1e-12;

ConvStage stage_init(Rng& rng, int cin, int cout) {
    ConvStage s;
    s.w = Tensor::randn(rng, {cout, cin, 3, 3}, 1.0 / std::sqrt(9.0 * cin), true);
    s.b = Tensor({cout}, true);
    s.gamma = Tensor::ones({cout}, true);
    s.beta = Tensor({cout}, true);
    return s;
}

HeadTower tower_init(Rng& rng, int d_model, int out_ch) {
    HeadTower t;
    int cin = d_model;
    for (int i = 0; i < 4; ++i) {
        const int cout = std::max(cin / 2, 4);
        t.stages.push_back(stage_init(rng, cin, cout));
        cin = cout;
    }
    t.w_out = Tensor::randn(rng, {out_ch, cin, 1, 1}, 1.0 / std::sqrt(static_cast<double>(cin)), true);
    t.b_out = Tensor({out_ch}, true);
    return t;
}

Tensor run_tower(const Tensor& grid, const HeadTower& t) {
    Tensor x = grid;
    for (const ConvStage& s : t.stages) x = relu(channel_norm2d(conv2d_same(x, s.w, s.b), s.gamma, s.beta));
    return sigmoid(conv2d_same(x, t.w_out, t.b_out));
}

int clamp_cell(double v, int extent) {
    const int cell = static_cast<int>(std::floor(v * extent));
    return std::min(std::max(cell, 0), extent - 1);
}

// Component i of a [4] box tensor as a [1] tensor, differentiable.
Tensor comp(const Tensor& box, int i) { return reshape(gather_rows(reshape(box, {4, 1}), {i}), {1}); }

void require_positive_extent(double w, double h, const char* who) {
    if (!(w > 0.0) || !(h > 0.0))
        throw DomainError(std::string(who) + ": degenerate box with extent " + std::to_string(w) + "x" +
                          std::to_string(h));
}

}  // namespace

HeadWeights HeadWeights::init(Rng& rng, int d_model) {
    HeadWeights w;
    w.cls = tower_init(rng, d_model, 1);
    w.offset = tower_init(rng, d_model, 2);
    w.size = tower_init(rng, d_model, 2);
    return w;
}

HeadOutput head_forward(const FusedFeature& fused, const HeadWeights& weights) {
    const Tensor& tok = fused.tokens;
    if (tok.rank() != 2) throw ShapeError("head_forward: expected [N,d] tokens, got " + shape_str(tok.shape()));
    const int n = tok.dim(0), d = tok.dim(1);
    int hs = fused.search_grid.first, ws = fused.search_grid.second;
    if (hs == 0 && ws == 0) {
        const int root = static_cast<int>(std::llround(std::sqrt(static_cast<double>(n))));
        if (root * root != n)
            throw ShapeError("head_forward: token count " + std::to_string(n) + " is not square and no grid given");
        hs = ws = root;
    }
    if (hs < 1 || ws < 1 || hs * ws > n)
        throw ShapeError("head_forward: grid [" + std::to_string(hs) + "," + std::to_string(ws) + "] does not fit " +
                         std::to_string(n) + " tokens");

    // Channel-major search feature map; template tokens are dropped.
    Tensor grid = reshape(transpose2d(slice_rows(tok, n - hs * ws, n)), {d, hs, ws});
    HeadOutput out;
    out.cls_map = reshape(run_tower(grid, weights.cls), {hs, ws});
    out.offset_map = run_tower(grid, weights.offset);
    out.size_map = run_tower(grid, weights.size);
    return out;
}

std::pair<int, int> peak_cell(const Tensor& cls_map) {
    if (cls_map.rank() != 2) throw ShapeError("peak_cell: expected [hs,ws], got " + shape_str(cls_map.shape()));
    const int hs = cls_map.dim(0), ws = cls_map.dim(1);
    const std::vector<double>& v = cls_map.values();
    int best = 0;
    for (int i = 1; i < hs * ws; ++i)
        if (v[static_cast<std::size_t>(i)] > v[static_cast<std::size_t>(best)]) best = i;
    return {best / ws, best % ws};
}

BBox decode_bbox(const HeadOutput& out) {
    const int hs = out.cls_map.dim(0), ws = out.cls_map.dim(1);
    if (out.offset_map.shape() != Shape{2, hs, ws} || out.size_map.shape() != Shape{2, hs, ws})
        throw ShapeError("decode_bbox: offset/size maps do not match the score grid");
    auto [r, c] = peak_cell(out.cls_map);
    const std::vector<double>& off = out.offset_map.values();
    const std::vector<double>& sz = out.size_map.values();
    const std::size_t at = static_cast<std::size_t>(r) * ws + c;
    const std::size_t plane = static_cast<std::size_t>(hs) * ws;
    BBox b;
    b.cx = (c + off[at]) / ws;
    b.cy = (r + off[plane + at]) / hs;
    b.w = sz[at];
    b.h = sz[plane + at];
    return b;
}

Tensor gaussian_target(const BBox& gt, int hs, int ws) {
    if (hs < 1 || ws < 1) throw ShapeError("gaussian_target: grid must be positive");
    require_positive_extent(gt.w, gt.h, "gaussian_target");
    const int r0 = clamp_cell(gt.cy, hs), c0 = clamp_cell(gt.cx, ws);
    const double sigma = std::max(1.0, std::hypot(gt.w * ws, gt.h * hs) / 6.0);
    std::vector<double> v(static_cast<std::size_t>(hs) * ws);
    for (int r = 0; r < hs; ++r)
        for (int c = 0; c < ws; ++c) {
            const double d2 = static_cast<double>((r - r0) * (r - r0) + (c - c0) * (c - c0));
            v[static_cast<std::size_t>(r) * ws + c] = std::exp(-d2 / (2.0 * sigma * sigma));
        }
    return Tensor::from_data({hs, ws}, std::move(v));
}

Tensor focal_loss(const Tensor& cls_map, const Tensor& target_map) {
    if (cls_map.rank() != 2) throw ShapeError("focal_loss: expected [hs,ws], got " + shape_str(cls_map.shape()));
    if (cls_map.shape() != target_map.shape())
        throw ShapeError("focal_loss: prediction " + shape_str(cls_map.shape()) + " vs target " +
                         shape_str(target_map.shape()));
    const std::vector<double>& y = target_map.values();
    int peaks = 0;
    std::vector<double> w_pos(y.size(), 0.0), w_off(y.size(), 0.0);
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (y[i] < 0.0 || y[i] > 1.0)
            throw DomainError("focal_loss: target value " + std::to_string(y[i]) + " outside [0,1]");
        if (y[i] == 1.0) {
            w_pos[i] = 1.0;
            ++peaks;
        } else {
            const double t = 1.0 - y[i];
            w_off[i] = t * t * t * t;
        }
    }
    if (peaks == 0) throw DomainError("focal_loss: target has no unit peak");

    Tensor p = clamp(cls_map, kProbEps, 1.0 - kProbEps);
    Tensor one_minus_p = add_scalar(mul_scalar(p, -1.0), 1.0);
    Tensor pos = mul(Tensor::from_data(cls_map.shape(), std::move(w_pos)),
                     mul(mul(one_minus_p, one_minus_p), mul_scalar(log(p), -1.0)));
    Tensor off = mul(Tensor::from_data(cls_map.shape(), std::move(w_off)),
                     mul(mul(p, p), mul_scalar(log(one_minus_p), -1.0)));
    return mul_scalar(sum_all(add(pos, off)), 1.0 / peaks);
}

Tensor giou_loss(const Tensor& pred, const BBox& gt) {
    if (pred.shape() != Shape{4})
        throw ShapeError("giou_loss: prediction must be [4] (cx,cy,w,h), got " + shape_str(pred.shape()));
    const std::vector<double>& v = pred.values();
    require_positive_extent(v[2], v[3], "giou_loss");
    require_positive_extent(gt.w, gt.h, "giou_loss");

    Tensor cx = comp(pred, 0), cy = comp(pred, 1), w = comp(pred, 2), h = comp(pred, 3);
    Tensor ax1 = sub(cx, mul_scalar(w, 0.5)), ax2 = add(cx, mul_scalar(w, 0.5));
    Tensor ay1 = sub(cy, mul_scalar(h, 0.5)), ay2 = add(cy, mul_scalar(h, 0.5));
    Tensor bx1 = Tensor::full({1}, gt.cx - gt.w / 2), bx2 = Tensor::full({1}, gt.cx + gt.w / 2);
    Tensor by1 = Tensor::full({1}, gt.cy - gt.h / 2), by2 = Tensor::full({1}, gt.cy + gt.h / 2);

    // Areas come from the same corner differences as the intersection so an
    // exact match collapses to IoU = 1 bitwise.
    Tensor area_a = mul(sub(ax2, ax1), sub(ay2, ay1));
    Tensor area_b = mul(sub(bx2, bx1), sub(by2, by1));
    Tensor inter = mul(relu(sub(min_ew(ax2, bx2), max_ew(ax1, bx1))), relu(sub(min_ew(ay2, by2), max_ew(ay1, by1))));
    Tensor uni = sub(add(area_a, area_b), inter);
    Tensor enclosing = mul(sub(max_ew(ax2, bx2), min_ew(ax1, bx1)), sub(max_ew(ay2, by2), min_ew(ay1, by1)));
    Tensor giou = sub(div(inter, uni), div(sub(enclosing, uni), enclosing));
    return add_scalar(mul_scalar(giou, -1.0), 1.0);
}

double giou_loss(const BBox& pred, const BBox& gt) {
    return giou_loss(Tensor::from_data({4}, {pred.cx, pred.cy, pred.w, pred.h}), gt).value();
}

Tensor total_loss(const HeadOutput& out, const BBox& gt, const LossWeights& weights) {
    if (weights.alpha < 0.0 || weights.beta < 0.0) throw DomainError("total_loss: loss weights must be nonnegative");
    const int hs = out.cls_map.dim(0), ws = out.cls_map.dim(1);
    if (out.offset_map.shape() != Shape{2, hs, ws} || out.size_map.shape() != Shape{2, hs, ws})
        throw ShapeError("total_loss: offset/size maps do not match the score grid");

    Tensor l_cls = focal_loss(out.cls_map, gaussian_target(gt, hs, ws));

    const int r0 = clamp_cell(gt.cy, hs), c0 = clamp_cell(gt.cx, ws);
    const int at = r0 * ws + c0, plane = hs * ws;
    Tensor off = gather_rows(reshape(out.offset_map, {2 * plane, 1}), {at, plane + at});
    Tensor sz = gather_rows(reshape(out.size_map, {2 * plane, 1}), {at, plane + at});
    Tensor cx = mul_scalar(add_scalar(slice_rows(off, 0, 1), static_cast<double>(c0)), 1.0 / ws);
    Tensor cy = mul_scalar(add_scalar(slice_rows(off, 1, 2), static_cast<double>(r0)), 1.0 / hs);
    Tensor pred = reshape(concat_rows({cx, cy, slice_rows(sz, 0, 1), slice_rows(sz, 1, 2)}), {4});

    Tensor l_iou = giou_loss(pred, gt);
    Tensor l_one = sum_all(abs(sub(pred, Tensor::from_data({4}, {gt.cx, gt.cy, gt.w, gt.h}))));
    return add(l_cls, add(mul_scalar(l_iou, weights.alpha), mul_scalar(l_one, weights.beta)));
}

}  // namespace xtrack
