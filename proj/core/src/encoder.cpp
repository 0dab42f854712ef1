// Copyright (c) 2026 The xtrack Authors
// SPDX-License-Identifier: Apache-2.0

#include "xtrack/encoder.hpp"

#include <cmath>

namespace xtrack {

EncoderLayerWeights EncoderLayerWeights::init(Rng& rng, int d_model, int heads, int mlp_ratio) {
    if (heads < 1 || d_model % heads != 0)
        throw ConfigError("encoder: " + std::to_string(heads) + " heads do not divide width " +
                          std::to_string(d_model));
    EncoderLayerWeights w;
    w.heads = heads;
    const double s = 1.0 / std::sqrt(static_cast<double>(d_model));
    w.ln1_g = Tensor::ones({d_model}, true);
    w.ln1_b = Tensor({d_model}, true);
    w.wq = Tensor::randn(rng, {d_model, d_model}, s, true);
    w.bq = Tensor({d_model}, true);
    w.wk = Tensor::randn(rng, {d_model, d_model}, s, true);
    w.bk = Tensor({d_model}, true);
    w.wv = Tensor::randn(rng, {d_model, d_model}, s, true);
    w.bv = Tensor({d_model}, true);
    w.wo = Tensor::randn(rng, {d_model, d_model}, s, true);
    w.bo = Tensor({d_model}, true);
    w.ln2_g = Tensor::ones({d_model}, true);
    w.ln2_b = Tensor({d_model}, true);
    const int mlp = mlp_ratio * d_model;
    w.w1 = Tensor::randn(rng, {d_model, mlp}, s, true);
    w.b1 = Tensor({mlp}, true);
    w.w2 = Tensor::randn(rng, {mlp, d_model}, 1.0 / std::sqrt(static_cast<double>(mlp)), true);
    w.b2 = Tensor({d_model}, true);
    return w;
}

Tensor patch_embed(const Tensor& image, int patch, const Tensor& w, const Tensor& b, const Tensor& pos) {
    if (image.rank() != 3) throw ShapeError("patch_embed: image must be [H,W,ch], got " + shape_str(image.shape()));
    const int h = image.dim(0), iw = image.dim(1), ch = image.dim(2);
    if (patch < 1 || h % patch != 0 || iw % patch != 0)
        throw ShapeError("patch_embed: image " + shape_str(image.shape()) + " not divisible by patch " +
                         std::to_string(patch));
    const int gh = h / patch, gw = iw / patch;
    const int n_tok = gh * gw;
    const int flat = patch * patch * ch;
    if (w.rank() != 2 || w.dim(0) != flat)
        throw ShapeError("patch_embed: projection " + shape_str(w.shape()) + " expects " + std::to_string(flat) +
                         " values per patch");
    const int d = w.dim(1);
    if (pos.shape() != Shape{n_tok, d})
        throw ShapeError("patch_embed: positional table " + shape_str(pos.shape()) + " for " +
                         std::to_string(n_tok) + " tokens of width " + std::to_string(d));

    // Patch gather; images never carry gradients, so a plain copy suffices.
    std::vector<double> patches(static_cast<std::size_t>(n_tok) * flat);
    const double* img = image.data();
    std::size_t o = 0;
    for (int py = 0; py < gh; ++py)
        for (int px = 0; px < gw; ++px)
            for (int y = 0; y < patch; ++y)
                for (int x = 0; x < patch; ++x)
                    for (int c = 0; c < ch; ++c)
                        patches[o++] =
                            img[(static_cast<std::size_t>(py * patch + y) * iw + (px * patch + x)) * ch + c];

    Tensor pm = Tensor::from_data({n_tok, flat}, std::move(patches));
    return add(add_rowvec(matmul(pm, w), b), pos);
}

std::pair<Tensor, Tensor> encoder_self_attention(const Tensor& x, const EncoderLayerWeights& w) {
    if (x.rank() != 2 || x.dim(1) != w.d_model())
        throw ShapeError("encoder: tokens " + shape_str(x.shape()) + " vs width " + std::to_string(w.d_model()));
    const int l = x.dim(0), d = w.d_model();
    const int heads = w.heads, dh = d / heads;

    Tensor xn = layer_norm(x, w.ln1_g, w.ln1_b);
    Tensor q = add_rowvec(matmul(xn, w.wq), w.bq);
    Tensor k = add_rowvec(matmul(xn, w.wk), w.bk);
    Tensor v = add_rowvec(matmul(xn, w.wv), w.bv);

    std::vector<double> avg(static_cast<std::size_t>(l) * l, 0.0);
    Tensor concat;
    for (int h = 0; h < heads; ++h) {
        Tensor qh = slice_cols(q, h * dh, (h + 1) * dh);
        Tensor kh = slice_cols(k, h * dh, (h + 1) * dh);
        Tensor vh = slice_cols(v, h * dh, (h + 1) * dh);
        Tensor attn = softmax_rows(mul_scalar(matmul(qh, transpose2d(kh)), 1.0 / std::sqrt(static_cast<double>(dh))));
        const double* av = attn.data();
        for (std::size_t i = 0; i < avg.size(); ++i) avg[i] += av[i] / heads;
        Tensor oh = matmul(attn, vh);
        concat = h == 0 ? oh : concat_cols(concat, oh);
    }

    Tensor x1 = add(x, add_rowvec(matmul(concat, w.wo), w.bo));
    Tensor hidden = gelu(add_rowvec(matmul(layer_norm(x1, w.ln2_g, w.ln2_b), w.w1), w.b1));
    Tensor y = add(x1, add_rowvec(matmul(hidden, w.w2), w.b2));
    return {y, Tensor::from_data({l, l}, std::move(avg))};
}

LayerResult encoder_layer(const ModalityTokens& rgb, const ModalityTokens& x, const EncoderLayerWeights& w) {
    rgb.check();
    x.check();
    if (!(rgb.layout == x.layout)) throw AlignmentError("encoder_layer: modality layouts disagree");

    LayerResult out;
    auto [yr, ar] = encoder_self_attention(rgb.tokens, w);
    auto [yx, ax] = encoder_self_attention(x.tokens, w);
    out.rgb = rgb;
    out.rgb.tokens = yr;
    out.x = x;
    out.x.tokens = yx;
    out.attn_rgb = AttentionRecord{ar, rgb.layout};
    out.attn_x = AttentionRecord{ax, x.layout};
    return out;
}

EncodeResult encode(const ModalityTokens& rgb, const ModalityTokens& x,
                    const std::vector<EncoderLayerWeights>& layers, const BsiWeights& bsi,
                    const std::vector<double>& schedule) {
    if (schedule.size() != layers.size())
        throw ConfigError("encode: schedule covers " + std::to_string(schedule.size()) + " layers, stack has " +
                          std::to_string(layers.size()));
    if (bsi.layers.size() != layers.size())
        throw ConfigError("encode: prompt weights cover " + std::to_string(bsi.layers.size()) + " layers, stack has " +
                          std::to_string(layers.size()));

    EncodeResult res;
    res.rgb = rgb;
    res.x = x;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        LayerResult lr = encoder_layer(res.rgb, res.x, layers[i]);
        res.attn_rgb.push_back(lr.attn_rgb);
        res.attn_x.push_back(lr.attn_x);

        SuppressionMask mask_rgb = select_filter_mask(similarity_scores(lr.attn_rgb), schedule[i]);
        SuppressionMask mask_x = select_filter_mask(similarity_scores(lr.attn_x), schedule[i]);
        res.masks_rgb.push_back(mask_rgb);
        res.masks_x.push_back(mask_x);

        ModalityTokens sup_rgb = apply_suppression(lr.rgb, mask_rgb);
        ModalityTokens sup_x = apply_suppression(lr.x, mask_x);
        auto [next_rgb, next_x] = cross_modal_prompt(sup_rgb, sup_x, bsi.layers[i]);
        res.rgb = next_rgb;
        res.x = next_x;
    }
    return res;
}

}  // namespace xtrack
