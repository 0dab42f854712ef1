// Copyright (c) 2026 The xtrack Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <string>
#include <utility>
#include <vector>

#include "xtrack/encoder.hpp"
#include "xtrack/fusion.hpp"
#include "xtrack/head.hpp"
#include "xtrack/temporal.hpp"

namespace xtrack {

struct ModelConfig {
    int d_model = 32;
    int heads = 4;
    int mlp_ratio = 4;
    int layers = 3;  // must be divisible by 3 (one suppression stage each)
    int d_inner = 64;
    int state_size = 8;
    int conv_kernel = 4;
    int patch = 8;
    int template_size = 32;
    int search_size = 64;
    int queue_capacity = 4;
    std::array<double, 3> lambda_stages{0.0, 0.15, 0.30};

    void validate() const;  // throws ConfigError
    Grid template_grid() const { return {template_size / patch, template_size / patch}; }
    Grid search_grid() const { return {search_size / patch, search_size / patch}; }
    int tokens_per_template() const { return template_grid().first * template_grid().second; }
    int search_tokens() const { return search_grid().first * search_grid().second; }
};

// All learnable state. Tensor handles share storage, so the named_params
// view below aliases the same buffers the forward pass reads.
struct ModelWeights {
    ModelConfig cfg;
    Tensor patch_rgb_w, patch_rgb_b;  // [patch*patch*3, d], [d]
    Tensor patch_x_w, patch_x_b;      // [patch*patch*1, d], [d]
    Tensor pos_z1, pos_z2;            // [tokens_per_template, d]
    Tensor pos_s;                     // [search_tokens, d]
    Tensor pos_t;                     // [queue_capacity, d]; row = token age, 0 = newest
    std::vector<EncoderLayerWeights> layers;
    BsiWeights bsi;
    TsgWeights tsg;
    FusionWeights fusion;
    HeadWeights head;

    static ModelWeights init(Rng& rng, const ModelConfig& cfg);

    // Stable enumeration (name, handle) of every parameter; the order defines
    // the serialization layout.
    std::vector<std::pair<std::string, Tensor>> named_params() const;
    std::size_t param_count() const;
    std::vector<double> suppression_schedule() const;
    void zero_grad() const;
};

struct FrameInputs {
    Tensor z1_rgb, z2_rgb, search_rgb;  // [3, ts, ts] x2, [3, ss, ss]
    Tensor z1_x, z2_x, search_x;        // [1, ts, ts] x2, [1, ss, ss]
};

// Patch-embeds one modality and appends the temporal rows: queue tokens in
// arrival order (oldest first), each plus the age-indexed embedding.
ModalityTokens assemble_tokens(const ModelWeights& w, const Tensor& z1, const Tensor& z2,
                               const Tensor& search, const TemporalQueue& queue, Modality m);

struct FrameResult {
    HeadOutput head;
    BBox box;                  // normalized search-window coordinates
    double score = 0.0;        // classification peak value
    Tensor t_cur_rgb, t_cur_x; // temporal tokens to push after this frame
    EncodeResult encoded;      // attention records and suppression masks
};

// One full frame: assemble, encode with suppression, generate the temporal
// tokens, fuse, predict. Queues are read, never written; callers push the
// returned tokens themselves.
FrameResult model_forward(const ModelWeights& w, const FrameInputs& in,
                          const TemporalQueue& q_rgb, const TemporalQueue& q_x);

}  // namespace xtrack
