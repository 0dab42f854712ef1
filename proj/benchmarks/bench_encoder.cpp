// Copyright (c) 2026 The xtrack Authors
// SPDX-License-Identifier: Apache-2.0
//
// Attention-side costs: one self-attention layer at growing token counts,
// the suppression scoring/masking pipeline and the joint fusion block.

#include <benchmark/benchmark.h>

#include <vector>

#include "xtrack/encoder.hpp"
#include "xtrack/fusion.hpp"
#include "xtrack/rng.hpp"
#include "xtrack/suppression.hpp"
#include "xtrack/tokens.hpp"

using namespace xtrack;

namespace {

constexpr int kDModel = 32;

TokenLayout square_layout(int gz, int gs, int n_t) {
    TokenLayout lay;
    lay.grid_z = {gz, gz};
    lay.grid_s = {gs, gs};
    lay.n_z = 2 * gz * gz;
    lay.n_s = gs * gs;
    lay.n_t = n_t;
    lay.d_model = kDModel;
    return lay;
}

ModalityTokens sample_tokens(const TokenLayout& lay, Modality m, uint64_t seed) {
    Rng rng(seed);
    ModalityTokens t;
    t.layout = lay;
    t.modality = m;
    t.tokens = Tensor::randn(rng, {lay.length(), lay.d_model});
    return t;
}

void BM_EncoderSelfAttention(benchmark::State& state) {
    const int l = static_cast<int>(state.range(0));
    Rng rng(37);
    EncoderLayerWeights w = EncoderLayerWeights::init(rng, kDModel, 4);
    Tensor x = Tensor::randn(rng, {l, kDModel});
    for (auto _ : state) {
        auto [y, attn] = encoder_self_attention(x, w);
        benchmark::DoNotOptimize(y.values().data());
        benchmark::DoNotOptimize(attn.values().data());
    }
    state.SetItemsProcessed(state.iterations() * l);
}

void BM_EncoderLayerPair(benchmark::State& state) {
    const int gs = static_cast<int>(state.range(0));
    TokenLayout lay = square_layout(4, gs, 4);
    ModalityTokens tr = sample_tokens(lay, Modality::RGB, 41);
    ModalityTokens tx = sample_tokens(lay, Modality::X, 43);
    Rng rng(47);
    EncoderLayerWeights w = EncoderLayerWeights::init(rng, kDModel, 4);
    for (auto _ : state) {
        LayerResult out = encoder_layer(tr, tx, w);
        benchmark::DoNotOptimize(out.rgb.tokens.values().data());
        benchmark::DoNotOptimize(out.x.tokens.values().data());
    }
    state.SetItemsProcessed(state.iterations() * lay.length() * 2);
}

void BM_SuppressionPipeline(benchmark::State& state) {
    const int gs = static_cast<int>(state.range(0));
    TokenLayout lay = square_layout(4, gs, 4);
    ModalityTokens tokens = sample_tokens(lay, Modality::RGB, 53);
    Rng rng(59);
    AttentionRecord attn;
    attn.layout = lay;
    Tensor logits = Tensor::randn(rng, {lay.length(), lay.length()});
    attn.avg = softmax_rows(logits).detach();
    for (auto _ : state) {
        std::vector<double> scores = similarity_scores(attn);
        SuppressionMask mask = select_filter_mask(scores, 0.30);
        ModalityTokens filtered = apply_suppression(tokens, mask);
        benchmark::DoNotOptimize(filtered.tokens.values().data());
    }
    state.SetItemsProcessed(state.iterations() * lay.n_s);
}

void BM_MambaFuse(benchmark::State& state) {
    const int gs = static_cast<int>(state.range(0));
    const int n_tokens = 2 * 4 * 4 + gs * gs;
    Rng rng(61);
    FusionWeights w = FusionWeights::init(rng, kDModel, 64, 8, 4);
    Tensor r = Tensor::randn(rng, {n_tokens, kDModel});
    Tensor x = Tensor::randn(rng, {n_tokens, kDModel});
    for (auto _ : state) {
        FusedFeature f = mamba_fuse(r, x, w, {gs, gs});
        benchmark::DoNotOptimize(f.tokens.values().data());
    }
    state.SetItemsProcessed(state.iterations() * n_tokens);
}

BENCHMARK(BM_EncoderSelfAttention)->Arg(48)->Arg(96)->Arg(192);
BENCHMARK(BM_EncoderLayerPair)->Arg(8)->Arg(12);
BENCHMARK(BM_SuppressionPipeline)->Arg(8)->Arg(16);
BENCHMARK(BM_MambaFuse)->Arg(8)->Arg(12);

}  // namespace
