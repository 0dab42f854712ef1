// Copyright (c) 2026 The xtrack Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <utility>
#include <vector>

#include "xtrack/tokens.hpp"

namespace xtrack {

// Background suppression: score search tokens by attention from the template
// centers and the temporal tokens, zero the lowest-lambda fraction, then
// exchange channel-concatenated prompts between the modalities.

struct SuppressionMask {
    std::vector<bool> suppressed;  // over search tokens, true = zeroed
    std::vector<double> scores;    // the scores the selection used

    int count() const {
        int c = 0;
        for (bool b : suppressed) c += b ? 1 : 0;
        return c;
    }
};

// Per-layer prompt projections F^i, one per branch: [2*d_model, d_model].
struct PromptWeights {
    Tensor w_rgb, b_rgb;
    Tensor w_x, b_x;

    static PromptWeights init(Rng& rng, int d_model);
};

struct BsiWeights {
    std::vector<PromptWeights> layers;

    static BsiWeights init(Rng& rng, int layer_count, int d_model);
};

// score(s) = 1/2 * mean over the 3x3 center tokens of both templates of
// W_Z[., s] + 1/2 * mean over temporal rows of W_T[., s]; with no temporal
// tokens the W_Z mean stands alone. Center rows/cols are
// floor((extent-1)/2) - 1 .. + 1, clipped to the grid (degenerate grids use
// every token).
std::vector<double> similarity_scores(const AttentionRecord& attn);

// Exactly floor(lambda * n_s) lowest-score tokens masked; ties broken by
// ascending token index. lambda must lie in [0, 1).
SuppressionMask select_filter_mask(const std::vector<double>& scores, double lambda);

// Zeroes masked search-token rows; template and temporal rows pass through
// untouched and positions never change.
ModalityTokens apply_suppression(const ModalityTokens& tokens, const SuppressionMask& mask);

// Per token position: RGB receives F_rgb([f_rgb; f_x]) as a residual, X
// receives F_x([f_x; f_rgb]) (channel order swapped).
std::pair<ModalityTokens, ModalityTokens> cross_modal_prompt(const ModalityTokens& f_rgb, const ModalityTokens& f_x,
                                                             const PromptWeights& w);

// Staged schedule: layers [0, L/3) -> stages[0], [L/3, 2L/3) -> stages[1],
// [2L/3, L) -> stages[2]. layer_count must be divisible by 3.
double schedule_lambda(int layer_index, const std::array<double, 3>& stages, int layer_count);

std::vector<double> full_schedule(const std::array<double, 3>& stages, int layer_count);

}  // namespace xtrack
