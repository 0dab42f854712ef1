// Copyright (c) 2026 The xtrack Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <utility>
#include <vector>

#include "xtrack/ops.hpp"
#include "xtrack/suppression.hpp"
#include "xtrack/tokens.hpp"

namespace xtrack {

// Pre-norm transformer layer; one weight set serves both modalities.
struct EncoderLayerWeights {
    int heads = 1;
    Tensor ln1_g, ln1_b;
    Tensor wq, bq, wk, bk, wv, bv;  // [d, d], [d]
    Tensor wo, bo;                  // [d, d], [d]
    Tensor ln2_g, ln2_b;
    Tensor w1, b1;  // [d, mlp], [mlp]
    Tensor w2, b2;  // [mlp, d], [d]

    static EncoderLayerWeights init(Rng& rng, int d_model, int heads, int mlp_ratio = 4);
    int d_model() const { return wq.dim(0); }
};

// Non-overlapping patches, flattened row-major as (py, px, channel), linearly
// projected, plus the caller's positional embedding for the region.
Tensor patch_embed(const Tensor& image, int patch, const Tensor& w, const Tensor& b, const Tensor& pos);

// Multi-head self-attention + MLP with pre-norm residuals. Returns the new
// tokens and the detached head-averaged attention map [l, l].
std::pair<Tensor, Tensor> encoder_self_attention(const Tensor& x, const EncoderLayerWeights& w);

struct LayerResult {
    ModalityTokens rgb, x;
    AttentionRecord attn_rgb, attn_x;
};

// Runs both modalities through the same weights. Layouts must match.
LayerResult encoder_layer(const ModalityTokens& rgb, const ModalityTokens& x, const EncoderLayerWeights& w);

struct EncodeResult {
    ModalityTokens rgb, x;
    std::vector<AttentionRecord> attn_rgb, attn_x;
    std::vector<SuppressionMask> masks_rgb, masks_x;
};

// Full stack: after every layer, suppression (that layer's lambda from the
// schedule) followed by the cross-modal prompt exchange.
EncodeResult encode(const ModalityTokens& rgb, const ModalityTokens& x,
                    const std::vector<EncoderLayerWeights>& layers, const BsiWeights& bsi,
                    const std::vector<double>& schedule);

}  // namespace xtrack
