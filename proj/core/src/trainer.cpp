// Copyright (c) 2026 The xtrack Authors
// SPDX-License-Identifier: Apache-2.0

#include "xtrack/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numeric>
#include <sstream>

#include "xtrack/error.hpp"
#include "xtrack/head.hpp"
#include "xtrack/image.hpp"
#include "xtrack/ops.hpp"
#include "xtrack/synth.hpp"

namespace xtrack {

void TrainConfig::validate() const {
    if (!(lr >= 0.0) || !std::isfinite(lr)) {
        throw ConfigError("train config: lr must be finite and >= 0, got " + std::to_string(lr));
    }
    if (!(momentum >= 0.0) || !(momentum < 1.0)) {
        throw ConfigError("train config: momentum must lie in [0, 1), got " +
                          std::to_string(momentum));
    }
    if (steps < 1) {
        throw ConfigError("train config: steps must be >= 1, got " + std::to_string(steps));
    }
    if (clip_len < 1) {
        throw ConfigError("train config: clip_len must be >= 1, got " + std::to_string(clip_len));
    }
}

TrainSequence sequence_to_memory(const std::string& dir) {
    Sequence seq = load_sequence(dir);
    TrainSequence out;
    out.width = seq.width;
    out.height = seq.height;
    std::filesystem::path base(dir);
    for (const SequenceFrame& f : seq.frames) {
        FramePair pair;
        pair.rgb = read_ppm((base / f.rgb_path).string());
        pair.x = read_pgm((base / f.x_path).string());
        if (pair.rgb.shape() != Shape{3, seq.height, seq.width}) {
            throw ValidationError("sequence frame " + f.rgb_path + " has extent " +
                                  shape_str(pair.rgb.shape()) + ", annotation says " +
                                  std::to_string(seq.width) + "x" + std::to_string(seq.height));
        }
        out.frames.push_back(std::move(pair));
        out.boxes.push_back(f.box);
    }
    return out;
}

SgdMomentum::SgdMomentum(const ModelWeights& w, double lr_, double momentum_)
    : lr(lr_), momentum(momentum_) {
    for (const auto& [name, p] : w.named_params()) {
        (void)name;
        velocity.emplace_back(p.numel(), 0.0);
    }
}

void SgdMomentum::step(const ModelWeights& w) {
    auto params = w.named_params();
    if (params.size() != velocity.size()) {
        throw AlignmentError("optimizer state covers " + std::to_string(velocity.size()) +
                             " tensors, model has " + std::to_string(params.size()));
    }
    for (size_t i = 0; i < params.size(); ++i) {
        Tensor p = params[i].second;
        std::vector<double>& v = velocity[i];
        if (!p.has_grad()) continue;  // parameter unused this step
        const std::vector<double>& g = p.grad();
        std::vector<double>& val = p.values();
        for (size_t k = 0; k < val.size(); ++k) {
            v[k] = momentum * v[k] + g[k];
            val[k] -= lr * v[k];
        }
    }
}

std::vector<ClipFrame> build_clip(const TrainSequence& seq, int start, int clip_len,
                                  const ModelConfig& cfg, double search_context) {
    int n = static_cast<int>(seq.frames.size());
    if (start < 0 || clip_len < 1 || start + clip_len > n) {
        throw DomainError("clip [" + std::to_string(start) + ", " +
                          std::to_string(start + clip_len) + ") outside sequence of " +
                          std::to_string(n) + " frames");
    }
    int ts = cfg.template_size;
    int ss = cfg.search_size;

    // Templates: both crops from the clip's first frame at its ground truth.
    const BBox& b0 = seq.boxes[start];
    double tctx = search_context * static_cast<double>(ts) / static_cast<double>(ss);
    double tside = crop_side(b0, tctx);
    if (tside <= 0.0) {
        throw DomainError("degenerate ground-truth box at frame " + std::to_string(start));
    }
    const FramePair& f0 = seq.frames[start];
    Tensor z_rgb = crop_resize(f0.rgb, b0.cx, b0.cy, tside, ts);
    Tensor z_x = crop_resize(f0.x, b0.cx, b0.cy, tside, ts);

    std::vector<ClipFrame> clip;
    for (int f = start; f < start + clip_len; ++f) {
        // Teacher forcing: the window sits where a tracker following the
        // ground truth would put it, centered on the previous frame's box.
        const BBox& prev = seq.boxes[f == start ? f : f - 1];
        double side = crop_side(prev, search_context);
        if (side <= 0.0) {
            throw DomainError("degenerate ground-truth box at frame " + std::to_string(f));
        }
        double ox = prev.cx - side / 2.0;
        double oy = prev.cy - side / 2.0;

        ClipFrame cf;
        cf.in.z1_rgb = z_rgb;
        cf.in.z2_rgb = z_rgb;
        cf.in.z1_x = z_x;
        cf.in.z2_x = z_x;
        cf.in.search_rgb = crop_resize(seq.frames[f].rgb, prev.cx, prev.cy, side, ss);
        cf.in.search_x = crop_resize(seq.frames[f].x, prev.cx, prev.cy, side, ss);
        const BBox& gt = seq.boxes[f];
        cf.target = {(gt.cx - ox) / side, (gt.cy - oy) / side, gt.w / side, gt.h / side};
        clip.push_back(std::move(cf));
    }
    return clip;
}

Tensor clip_loss(const ModelWeights& w, const std::vector<ClipFrame>& clip,
                 const LossWeights& lw) {
    if (clip.empty()) throw DomainError("clip_loss: empty clip");
    TemporalQueue q_rgb(w.cfg.queue_capacity), q_x(w.cfg.queue_capacity);
    Tensor sum;
    bool first = true;
    for (const ClipFrame& cf : clip) {
        FrameResult r = model_forward(w, cf.in, q_rgb, q_x);
        q_rgb = queue_push(q_rgb, r.t_cur_rgb);  // detached: no cross-frame flow
        q_x = queue_push(q_x, r.t_cur_x);
        Tensor l = total_loss(r.head, cf.target, lw);
        sum = first ? l : add(sum, l);
        first = false;
    }
    return mul_scalar(sum, 1.0 / static_cast<double>(clip.size()));
}

namespace {

double window_mean(const std::vector<double>& v, size_t begin, size_t count) {
    double s = std::accumulate(v.begin() + begin, v.begin() + begin + count, 0.0);
    return s / static_cast<double>(count);
}

}  // namespace

TrainStats train_toy(ModelWeights& w, const std::vector<TrainSequence>& data,
                     const TrainConfig& cfg, const LossWeights& lw, double search_context,
                     uint64_t seed) {
    cfg.validate();
    if (data.empty()) throw ValidationError("train_toy: no training sequences");
    for (const TrainSequence& s : data) {
        if (static_cast<int>(s.frames.size()) < cfg.clip_len) {
            throw ValidationError("train_toy: sequence of " + std::to_string(s.frames.size()) +
                                  " frames is shorter than clip_len " +
                                  std::to_string(cfg.clip_len));
        }
    }

    Rng rng(seed);
    SgdMomentum opt(w, cfg.lr, cfg.momentum);
    TrainStats stats;
    for (int step = 0; step < cfg.steps; ++step) {
        int si = static_cast<int>(rng.uniform_int(static_cast<uint64_t>(data.size())));
        const TrainSequence& seq = data[si];
        int max_start = static_cast<int>(seq.frames.size()) - cfg.clip_len;
        int start = max_start > 0
                        ? static_cast<int>(rng.uniform_int(static_cast<uint64_t>(max_start + 1)))
                        : 0;
        std::vector<ClipFrame> clip = build_clip(seq, start, cfg.clip_len, w.cfg, search_context);

        w.zero_grad();
        Tensor loss;
        try {
            Tape tape;
            loss = clip_loss(w, clip, lw);
            if (!std::isfinite(loss.value())) {
                throw NumericError("train_toy: loss diverged at step " + std::to_string(step));
            }
            tape.backward(loss);
        } catch (const DomainError& e) {
            // Degenerate boxes or saturated activations after an update are
            // divergence, not bad input.
            throw NumericError("train_toy: diverged at step " + std::to_string(step) + " (" +
                               e.what() + ")");
        }
        opt.step(w);
        stats.losses.push_back(loss.value());
    }

    size_t k = std::min<size_t>(20, stats.losses.size());
    stats.initial_smoothed = window_mean(stats.losses, 0, k);
    stats.final_smoothed = window_mean(stats.losses, stats.losses.size() - k, k);
    return stats;
}

std::string loss_csv(const std::vector<double>& losses) {
    std::ostringstream os;
    os << "step,loss\n";
    for (size_t i = 0; i < losses.size(); ++i) {
        char buf[40];
        std::snprintf(buf, sizeof(buf), "%.17g", losses[i]);
        os << i << "," << buf << "\n";
    }
    return os.str();
}

}  // namespace xtrack
