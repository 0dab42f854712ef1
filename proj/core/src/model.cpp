// Copyright (c) 2026 The xtrack Authors
// SPDX-License-Identifier: Apache-2.0

#include "xtrack/model.hpp"

#include <cmath>

#include "xtrack/error.hpp"
#include "xtrack/ops.hpp"

namespace xtrack {

void ModelConfig::validate() const {
    if (d_model < 2 || d_model > 1024) throw ConfigError("d_model out of range [2, 1024]");
    if (heads < 1 || d_model % heads != 0)
        throw ConfigError("heads must divide d_model (" + std::to_string(heads) + " vs " +
                          std::to_string(d_model) + ")");
    if (mlp_ratio < 1 || mlp_ratio > 16) throw ConfigError("mlp_ratio out of range [1, 16]");
    if (layers < 3 || layers % 3 != 0)
        throw ConfigError("layers must be a positive multiple of 3, got " + std::to_string(layers));
    if (d_inner < 1 || state_size < 1 || conv_kernel < 1)
        throw ConfigError("scan dimensions must be positive");
    if (patch < 1) throw ConfigError("patch must be positive");
    if (template_size < patch || template_size % patch != 0)
        throw ConfigError("template_size must be a positive multiple of patch");
    if (search_size < patch || search_size % patch != 0)
        throw ConfigError("search_size must be a positive multiple of patch");
    if (queue_capacity < 1) throw ConfigError("queue_capacity must be positive");
    for (double l : lambda_stages)
        if (l < 0.0 || l >= 1.0) throw ConfigError("suppression fractions must lie in [0, 1)");
}

ModelWeights ModelWeights::init(Rng& rng, const ModelConfig& cfg) {
    cfg.validate();
    ModelWeights w;
    w.cfg = cfg;
    int d = cfg.d_model, p = cfg.patch;
    w.patch_rgb_w = Tensor::randn(rng, {p * p * 3, d}, 1.0 / std::sqrt(p * p * 3.0), true);
    w.patch_rgb_b = Tensor::zeros({d}, true);
    w.patch_x_w = Tensor::randn(rng, {p * p, d}, 1.0 / std::sqrt(static_cast<double>(p * p)), true);
    w.patch_x_b = Tensor::zeros({d}, true);
    w.pos_z1 = Tensor::randn(rng, {cfg.tokens_per_template(), d}, 0.02, true);
    w.pos_z2 = Tensor::randn(rng, {cfg.tokens_per_template(), d}, 0.02, true);
    w.pos_s = Tensor::randn(rng, {cfg.search_tokens(), d}, 0.02, true);
    w.pos_t = Tensor::randn(rng, {cfg.queue_capacity, d}, 0.02, true);
    w.layers.reserve(static_cast<size_t>(cfg.layers));
    for (int i = 0; i < cfg.layers; ++i)
        w.layers.push_back(EncoderLayerWeights::init(rng, d, cfg.heads, cfg.mlp_ratio));
    w.bsi = BsiWeights::init(rng, cfg.layers, d);
    w.tsg = TsgWeights::init(rng, d, cfg.d_inner, cfg.state_size, cfg.conv_kernel);
    w.fusion = FusionWeights::init(rng, d, cfg.d_inner, cfg.state_size, cfg.conv_kernel);
    w.head = HeadWeights::init(rng, d);
    return w;
}

namespace {

using Named = std::vector<std::pair<std::string, Tensor>>;

void add_ssm(Named& out, const std::string& prefix, const SsmParams& s) {
    out.emplace_back(prefix + ".a_log", s.a_log);
    out.emplace_back(prefix + ".d_skip", s.d_skip);
    out.emplace_back(prefix + ".w_b", s.w_b);
    out.emplace_back(prefix + ".w_c", s.w_c);
    out.emplace_back(prefix + ".w_delta", s.w_delta);
    out.emplace_back(prefix + ".delta_bias", s.delta_bias);
}

void add_mamba(Named& out, const std::string& prefix, const MambaBlockWeights& m) {
    out.emplace_back(prefix + ".w_in", m.w_in);
    out.emplace_back(prefix + ".b_in", m.b_in);
    out.emplace_back(prefix + ".w_gate", m.w_gate);
    out.emplace_back(prefix + ".b_gate", m.b_gate);
    out.emplace_back(prefix + ".conv_w", m.conv_w);
    out.emplace_back(prefix + ".conv_b", m.conv_b);
    add_ssm(out, prefix + ".fwd", m.fwd);
    add_ssm(out, prefix + ".bwd", m.bwd);
    out.emplace_back(prefix + ".w_out", m.w_out);
    out.emplace_back(prefix + ".b_out", m.b_out);
}

void add_tower(Named& out, const std::string& prefix, const HeadTower& t) {
    for (size_t i = 0; i < t.stages.size(); ++i) {
        std::string sp = prefix + ".s" + std::to_string(i);
        out.emplace_back(sp + ".w", t.stages[i].w);
        out.emplace_back(sp + ".b", t.stages[i].b);
        out.emplace_back(sp + ".gamma", t.stages[i].gamma);
        out.emplace_back(sp + ".beta", t.stages[i].beta);
    }
    out.emplace_back(prefix + ".out_w", t.w_out);
    out.emplace_back(prefix + ".out_b", t.b_out);
}

}  // namespace

std::vector<std::pair<std::string, Tensor>> ModelWeights::named_params() const {
    Named out;
    out.emplace_back("patch.rgb.w", patch_rgb_w);
    out.emplace_back("patch.rgb.b", patch_rgb_b);
    out.emplace_back("patch.x.w", patch_x_w);
    out.emplace_back("patch.x.b", patch_x_b);
    out.emplace_back("pos.z1", pos_z1);
    out.emplace_back("pos.z2", pos_z2);
    out.emplace_back("pos.s", pos_s);
    out.emplace_back("pos.t", pos_t);
    for (size_t i = 0; i < layers.size(); ++i) {
        std::string p = "enc" + std::to_string(i);
        const EncoderLayerWeights& l = layers[i];
        out.emplace_back(p + ".ln1_g", l.ln1_g);
        out.emplace_back(p + ".ln1_b", l.ln1_b);
        out.emplace_back(p + ".wq", l.wq);
        out.emplace_back(p + ".bq", l.bq);
        out.emplace_back(p + ".wk", l.wk);
        out.emplace_back(p + ".bk", l.bk);
        out.emplace_back(p + ".wv", l.wv);
        out.emplace_back(p + ".bv", l.bv);
        out.emplace_back(p + ".wo", l.wo);
        out.emplace_back(p + ".bo", l.bo);
        out.emplace_back(p + ".ln2_g", l.ln2_g);
        out.emplace_back(p + ".ln2_b", l.ln2_b);
        out.emplace_back(p + ".w1", l.w1);
        out.emplace_back(p + ".b1", l.b1);
        out.emplace_back(p + ".w2", l.w2);
        out.emplace_back(p + ".b2", l.b2);
    }
    for (size_t i = 0; i < bsi.layers.size(); ++i) {
        std::string p = "bsi" + std::to_string(i);
        out.emplace_back(p + ".w_rgb", bsi.layers[i].w_rgb);
        out.emplace_back(p + ".b_rgb", bsi.layers[i].b_rgb);
        out.emplace_back(p + ".w_x", bsi.layers[i].w_x);
        out.emplace_back(p + ".b_x", bsi.layers[i].b_x);
    }
    add_mamba(out, "tsg.rgb", tsg.block_rgb);
    add_mamba(out, "tsg.x", tsg.block_x);
    out.emplace_back("tsg.empty_rgb", tsg.empty_rgb.embedding);
    out.emplace_back("tsg.empty_x", tsg.empty_x.embedding);
    add_mamba(out, "fuse.block", fusion.block);
    out.emplace_back("fuse.w_proj", fusion.w_proj);
    out.emplace_back("fuse.b_proj", fusion.b_proj);
    add_tower(out, "head.cls", head.cls);
    add_tower(out, "head.offset", head.offset);
    add_tower(out, "head.size", head.size);
    return out;
}

std::size_t ModelWeights::param_count() const {
    std::size_t n = 0;
    for (const auto& [name, t] : named_params()) n += t.numel();
    return n;
}

std::vector<double> ModelWeights::suppression_schedule() const {
    return full_schedule(cfg.lambda_stages, cfg.layers);
}

void ModelWeights::zero_grad() const {
    for (const auto& [name, t] : named_params()) {
        Tensor h = t;
        h.zero_grad();
    }
}

namespace {

// Image tensors arrive planar [ch, h, w]; the patch projection consumes
// interleaved [h, w, ch]. Images carry no gradients, so this is a raw copy.
Tensor interleave_hwc(const Tensor& img) {
    int ch = img.dim(0), h = img.dim(1), w = img.dim(2);
    std::vector<double> out(img.numel());
    const double* src = img.data();
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c)
            for (int k = 0; k < ch; ++k)
                out[(static_cast<size_t>(r) * w + c) * ch + k] =
                    src[(static_cast<size_t>(k) * h + r) * w + c];
    return Tensor::from_data({h, w, ch}, std::move(out));
}

}  // namespace

ModalityTokens assemble_tokens(const ModelWeights& w, const Tensor& z1, const Tensor& z2,
                               const Tensor& search, const TemporalQueue& queue, Modality m) {
    const ModelConfig& cfg = w.cfg;
    int ch = m == Modality::RGB ? 3 : 1;
    auto expect = [&](const Tensor& t, int extent, const char* what) {
        if (t.rank() != 3 || t.dim(0) != ch || t.dim(1) != extent || t.dim(2) != extent)
            throw ShapeError(std::string(what) + " crop must be [" + std::to_string(ch) + ", " +
                             std::to_string(extent) + ", " + std::to_string(extent) + "], got " +
                             shape_str(t.shape()));
    };
    expect(z1, cfg.template_size, "template-1");
    expect(z2, cfg.template_size, "template-2");
    expect(search, cfg.search_size, "search");
    if (queue.size() > cfg.queue_capacity)
        throw AlignmentError("queue holds " + std::to_string(queue.size()) +
                             " tokens but the model embeds at most " +
                             std::to_string(cfg.queue_capacity));
    const Tensor& pw = m == Modality::RGB ? w.patch_rgb_w : w.patch_x_w;
    const Tensor& pb = m == Modality::RGB ? w.patch_rgb_b : w.patch_x_b;
    std::vector<Tensor> parts = {patch_embed(interleave_hwc(z1), cfg.patch, pw, pb, w.pos_z1),
                                 patch_embed(interleave_hwc(z2), cfg.patch, pw, pb, w.pos_z2),
                                 patch_embed(interleave_hwc(search), cfg.patch, pw, pb, w.pos_s)};
    int n_t = queue.size();
    for (int i = 0; i < n_t; ++i) {
        int age = n_t - 1 - i;
        parts.push_back(add(reshape(queue.tokens[static_cast<size_t>(i)], {1, cfg.d_model}),
                            gather_rows(w.pos_t, {age})));
    }
    ModalityTokens out;
    out.tokens = concat_rows(parts);
    out.layout.n_z = 2 * cfg.tokens_per_template();
    out.layout.n_s = cfg.search_tokens();
    out.layout.n_t = n_t;
    out.layout.d_model = cfg.d_model;
    out.layout.grid_z = cfg.template_grid();
    out.layout.grid_s = cfg.search_grid();
    out.modality = m;
    out.check();
    return out;
}

FrameResult model_forward(const ModelWeights& w, const FrameInputs& in,
                          const TemporalQueue& q_rgb, const TemporalQueue& q_x) {
    w.cfg.validate();
    if (q_rgb.size() != q_x.size())
        throw AlignmentError("modality queues disagree: " + std::to_string(q_rgb.size()) +
                             " rgb vs " + std::to_string(q_x.size()) + " x tokens");
    ModalityTokens rgb = assemble_tokens(w, in.z1_rgb, in.z2_rgb, in.search_rgb, q_rgb, Modality::RGB);
    ModalityTokens x = assemble_tokens(w, in.z1_x, in.z2_x, in.search_x, q_x, Modality::X);

    FrameResult r;
    r.encoded = encode(rgb, x, w.layers, w.bsi, w.suppression_schedule());

    Tensor tsg_rgb = build_tsg_input(r.encoded.rgb, q_rgb, w.tsg.empty_rgb);
    Tensor tsg_x = build_tsg_input(r.encoded.x, q_x, w.tsg.empty_x);
    auto [t_rgb, t_x] = tsg_step(tsg_rgb, tsg_x, w.tsg);
    r.t_cur_rgb = t_rgb;
    r.t_cur_x = t_x;

    // Fusion consumes the template and search regions; the temporal rows
    // only steer attention and the next frame's queue token.
    int nzs = rgb.layout.search_end();
    FusedFeature fused = mamba_fuse(slice_rows(r.encoded.rgb.tokens, 0, nzs),
                                    slice_rows(r.encoded.x.tokens, 0, nzs), w.fusion,
                                    w.cfg.search_grid());
    r.head = head_forward(fused, w.head);
    r.box = decode_bbox(r.head);
    auto [pr, pc] = peak_cell(r.head.cls_map);
    r.score = r.head.cls_map.at2(pr, pc);
    return r;
}

}  // namespace xtrack
