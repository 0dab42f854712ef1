// Copyright (c) 2026 The xtrack Authors
// SPDX-License-Identifier: Apache-2.0

#include "xtrack/suppression.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "xtrack/ops.hpp"

namespace xtrack {

PromptWeights PromptWeights::init(Rng& rng, int d_model) {
    PromptWeights w;
    const double scale = 1.0 / std::sqrt(2.0 * d_model);
    w.w_rgb = Tensor::randn(rng, {2 * d_model, d_model}, scale, true);
    w.b_rgb = Tensor({d_model}, true);
    w.w_x = Tensor::randn(rng, {2 * d_model, d_model}, scale, true);
    w.b_x = Tensor({d_model}, true);
    return w;
}

BsiWeights BsiWeights::init(Rng& rng, int layer_count, int d_model) {
    BsiWeights b;
    b.layers.reserve(static_cast<std::size_t>(layer_count));
    for (int i = 0; i < layer_count; ++i) b.layers.push_back(PromptWeights::init(rng, d_model));
    return b;
}

namespace {

// Token indices of one template's 3x3 center block, clipped to the grid.
void append_center_indices(const Grid& grid, int base, std::vector<int>& out) {
    const int h = grid.first, w = grid.second;
    const int cr = (h - 1) / 2, cc = (w - 1) / 2;
    for (int r = std::max(0, cr - 1); r <= std::min(h - 1, cr + 1); ++r)
        for (int c = std::max(0, cc - 1); c <= std::min(w - 1, cc + 1); ++c) out.push_back(base + r * w + c);
}

}  // namespace

std::vector<double> similarity_scores(const AttentionRecord& attn) {
    const TokenLayout& lay = attn.layout;
    lay.check();
    const int l = lay.length();
    if (attn.avg.rank() != 2 || attn.avg.dim(0) != l || attn.avg.dim(1) != l)
        throw AlignmentError("similarity_scores: attention " + shape_str(attn.avg.shape()) + " for sequence length " +
                             std::to_string(l));

    std::vector<int> center;
    const int per_template = lay.grid_z.first * lay.grid_z.second;
    append_center_indices(lay.grid_z, 0, center);
    append_center_indices(lay.grid_z, per_template, center);

    std::vector<double> scores(static_cast<std::size_t>(lay.n_s), 0.0);
    const double* a = attn.avg.data();
    for (int s = 0; s < lay.n_s; ++s) {
        const int col = lay.search_begin() + s;
        double wz = 0.0;
        for (int row : center) wz += a[static_cast<std::size_t>(row) * l + col];
        wz /= static_cast<double>(center.size());
        if (lay.n_t == 0) {
            scores[static_cast<std::size_t>(s)] = wz;
            continue;
        }
        double wt = 0.0;
        for (int t = 0; t < lay.n_t; ++t)
            wt += a[static_cast<std::size_t>(lay.temporal_begin() + t) * l + col];
        wt /= static_cast<double>(lay.n_t);
        scores[static_cast<std::size_t>(s)] = 0.5 * wz + 0.5 * wt;
    }
    return scores;
}

SuppressionMask select_filter_mask(const std::vector<double>& scores, double lambda) {
    if (!(lambda >= 0.0 && lambda < 1.0)) throw DomainError("select_filter_mask: lambda must lie in [0,1)");
    const int n = static_cast<int>(scores.size());
    const int k = static_cast<int>(std::floor(lambda * n));

    std::vector<int> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (scores[static_cast<std::size_t>(a)] != scores[static_cast<std::size_t>(b)])
            return scores[static_cast<std::size_t>(a)] < scores[static_cast<std::size_t>(b)];
        return a < b;  // deterministic tie rule
    });

    SuppressionMask mask;
    mask.scores = scores;
    mask.suppressed.assign(scores.size(), false);
    for (int i = 0; i < k; ++i) mask.suppressed[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = true;
    return mask;
}

ModalityTokens apply_suppression(const ModalityTokens& tokens, const SuppressionMask& mask) {
    tokens.check();
    const TokenLayout& lay = tokens.layout;
    if (static_cast<int>(mask.suppressed.size()) != lay.n_s)
        throw AlignmentError("apply_suppression: mask over " + std::to_string(mask.suppressed.size()) +
                             " tokens, layout has " + std::to_string(lay.n_s));

    std::vector<double> factors(static_cast<std::size_t>(lay.length()), 1.0);
    for (int s = 0; s < lay.n_s; ++s)
        if (mask.suppressed[static_cast<std::size_t>(s)])
            factors[static_cast<std::size_t>(lay.search_begin() + s)] = 0.0;

    ModalityTokens out = tokens;
    out.tokens = scale_rows(tokens.tokens, factors);
    return out;
}

std::pair<ModalityTokens, ModalityTokens> cross_modal_prompt(const ModalityTokens& f_rgb, const ModalityTokens& f_x,
                                                             const PromptWeights& w) {
    f_rgb.check();
    f_x.check();
    if (!(f_rgb.layout == f_x.layout))
        throw AlignmentError("cross_modal_prompt: modality layouts disagree");
    const int d = f_rgb.layout.d_model;
    if (w.w_rgb.shape() != Shape{2 * d, d} || w.w_x.shape() != Shape{2 * d, d})
        throw ShapeError("cross_modal_prompt: projection must be [2d,d], got " + shape_str(w.w_rgb.shape()));

    Tensor prompt_rgb = add_rowvec(matmul(concat_cols(f_rgb.tokens, f_x.tokens), w.w_rgb), w.b_rgb);
    Tensor prompt_x = add_rowvec(matmul(concat_cols(f_x.tokens, f_rgb.tokens), w.w_x), w.b_x);

    ModalityTokens out_rgb = f_rgb;
    out_rgb.tokens = add(f_rgb.tokens, prompt_rgb);
    ModalityTokens out_x = f_x;
    out_x.tokens = add(f_x.tokens, prompt_x);
    return {out_rgb, out_x};
}

double schedule_lambda(int layer_index, const std::array<double, 3>& stages, int layer_count) {
    if (layer_count <= 0 || layer_count % 3 != 0)
        throw ConfigError("schedule_lambda: layer count " + std::to_string(layer_count) + " is not divisible by 3");
    if (layer_index < 0 || layer_index >= layer_count)
        throw ConfigError("schedule_lambda: layer " + std::to_string(layer_index) + " outside [0," +
                          std::to_string(layer_count) + ")");
    for (double s : stages)
        if (!(s >= 0.0 && s < 1.0)) throw ConfigError("schedule_lambda: stage ratios must lie in [0,1)");
    return stages[static_cast<std::size_t>(layer_index / (layer_count / 3))];
}

std::vector<double> full_schedule(const std::array<double, 3>& stages, int layer_count) {
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(layer_count));
    for (int i = 0; i < layer_count; ++i) out.push_back(schedule_lambda(i, stages, layer_count));
    return out;
}

}  // namespace xtrack
