// Copyright (c) 2026 The xtrack Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <utility>
#include <vector>

#include "xtrack/ssm.hpp"
#include "xtrack/tokens.hpp"

namespace xtrack {

// Sliding window of the m most recent temporal tokens, ordered oldest ->
// newest. Pushed tokens are detached: no gradient flows across frames.
struct TemporalQueue {
    std::vector<Tensor> tokens;  // each [d_model]
    int m = 4;                   // capacity
    int t = 0;                   // frames pushed so far

    TemporalQueue() = default;
    explicit TemporalQueue(int capacity);

    int size() const { return static_cast<int>(tokens.size()); }
    void clear() { tokens.clear(); }
};

// Returns a copy of `queue` with `t_cur` appended (detached); drops the
// oldest entry when capacity is exceeded.
TemporalQueue queue_push(const TemporalQueue& queue, const Tensor& t_cur);

// Learned slot appended to the scan input; the output at its position
// becomes the frame's new temporal token.
struct EmptyToken {
    Tensor embedding;  // [d_model]

    static EmptyToken init(int d_model);
};

struct TsgWeights {
    MambaBlockWeights block_rgb, block_x;
    EmptyToken empty_rgb, empty_x;

    static TsgWeights init(Rng& rng, int d_model, int d_inner, int state_size, int conv_kernel);
    int d_model() const { return block_rgb.d_model(); }
};

// Assembles [Z; S; queue contents; empty] from the current frame's encoded
// tokens and the raw previous temporal tokens.
Tensor build_tsg_input(const ModalityTokens& encoded, const TemporalQueue& queue, const EmptyToken& empty);

// Cross-modal bidirectional scan over both assembled sequences; returns the
// output vectors at the final (empty-token) position, one per modality.
std::pair<Tensor, Tensor> tsg_step(const Tensor& in_rgb, const Tensor& in_x, const TsgWeights& weights);

}  // namespace xtrack
