// Copyright (c) 2026 The xtrack Authors
// SPDX-License-Identifier: Apache-2.0

#include "xtrack/temporal.hpp"

#include <utility>
#include <vector>

#include "xtrack/error.hpp"
#include "xtrack/ops.hpp"

namespace xtrack {

TemporalQueue::TemporalQueue(int capacity) : m(capacity) {
    if (capacity < 1) throw ConfigError("temporal queue capacity must be positive, got " + std::to_string(capacity));
}

TemporalQueue queue_push(const TemporalQueue& queue, const Tensor& t_cur) {
    if (t_cur.rank() != 1) throw ShapeError("queue_push: temporal token must be rank 1, got " + shape_str(t_cur.shape()));
    TemporalQueue out = queue;
    out.tokens.push_back(t_cur.detach());
    if (out.size() > out.m) out.tokens.erase(out.tokens.begin());
    out.t += 1;
    return out;
}

EmptyToken EmptyToken::init(int d_model) {
    EmptyToken e;
    e.embedding = Tensor::zeros({d_model}, true);
    return e;
}

TsgWeights TsgWeights::init(Rng& rng, int d_model, int d_inner, int state_size, int conv_kernel) {
    TsgWeights w;
    w.block_rgb = MambaBlockWeights::init(rng, d_model, d_inner, state_size, conv_kernel);
    w.block_x = MambaBlockWeights::init(rng, d_model, d_inner, state_size, conv_kernel);
    w.empty_rgb = EmptyToken::init(d_model);
    w.empty_x = EmptyToken::init(d_model);
    return w;
}

Tensor build_tsg_input(const ModalityTokens& encoded, const TemporalQueue& queue, const EmptyToken& empty) {
    encoded.check();
    const int d = encoded.layout.d_model;
    if (encoded.layout.n_t != queue.size())
        throw AlignmentError("build_tsg_input: layout holds " + std::to_string(encoded.layout.n_t) +
                             " temporal tokens but queue holds " + std::to_string(queue.size()));
    if (empty.embedding.shape() != Shape{d})
        throw ShapeError("build_tsg_input: empty token is " + shape_str(empty.embedding.shape()) + ", want [" +
                         std::to_string(d) + "]");
    for (const Tensor& tok : queue.tokens)
        if (tok.shape() != Shape{d})
            throw ShapeError("build_tsg_input: queue token is " + shape_str(tok.shape()) + ", want [" + std::to_string(d) +
                             "]");

    std::vector<Tensor> parts;
    parts.push_back(slice_rows(encoded.tokens, 0, encoded.layout.temporal_begin()));
    for (const Tensor& tok : queue.tokens) parts.push_back(reshape(tok, {1, d}));
    parts.push_back(reshape(empty.embedding, {1, d}));
    return concat_rows(parts);
}

std::pair<Tensor, Tensor> tsg_step(const Tensor& in_rgb, const Tensor& in_x, const TsgWeights& weights) {
    if (in_rgb.shape() != in_x.shape())
        throw AlignmentError("tsg_step: modality sequences disagree: " + shape_str(in_rgb.shape()) + " vs " +
                             shape_str(in_x.shape()));
    auto [y_rgb, y_x] = cross_mamba_block(in_rgb, in_x, weights.block_rgb, weights.block_x);
    const int l = y_rgb.dim(0), d = y_rgb.dim(1);
    Tensor t_rgb = reshape(slice_rows(y_rgb, l - 1, l), {d});
    Tensor t_x = reshape(slice_rows(y_x, l - 1, l), {d});
    return {t_rgb, t_x};
}

}  // namespace xtrack
