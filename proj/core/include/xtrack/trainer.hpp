// Copyright (c) 2026 The xtrack Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <utility>
#include <vector>

#include "xtrack/model.hpp"
#include "xtrack/tracker.hpp"

namespace xtrack {

struct TrainConfig {
    double lr = 0.01;
    double momentum = 0.9;
    int steps = 200;
    int clip_len = 3;

    void validate() const;  // throws ConfigError
};

// A sequence loaded fully into memory for clip sampling.
struct TrainSequence {
    int width = 0, height = 0;
    std::vector<FramePair> frames;
    std::vector<BBox> boxes;  // ground truth, image pixels, center format
};

// Reads every frame of a generated sequence directory.
TrainSequence sequence_to_memory(const std::string& dir);

// Plain SGD with momentum over the model's named parameters:
// v <- momentum * v + grad;  p <- p - lr * v.
struct SgdMomentum {
    double lr = 0.01;
    double momentum = 0.9;
    std::vector<std::vector<double>> velocity;  // aligned with named_params order

    SgdMomentum(const ModelWeights& w, double lr, double momentum);
    void step(const ModelWeights& w);
};

// Model inputs plus the target box for one teacher-forced clip frame: the
// search window is centered on the previous frame's ground truth, templates
// are cut once at the clip's first frame.
struct ClipFrame {
    FrameInputs in;
    BBox target;  // normalized search-window coordinates
};

// Builds clip_len consecutive frames starting at `start`. Throws DomainError
// when the clip runs past the sequence or a ground-truth box is degenerate.
std::vector<ClipFrame> build_clip(const TrainSequence& seq, int start, int clip_len,
                                  const ModelConfig& cfg, double search_context);

// Forward over one clip with detached queues between frames; returns the
// mean per-frame loss as a differentiable scalar.
Tensor clip_loss(const ModelWeights& w, const std::vector<ClipFrame>& clip,
                 const LossWeights& lw);

struct TrainStats {
    std::vector<double> losses;  // one entry per step
    double initial_smoothed = 0.0;
    double final_smoothed = 0.0;
};

// Seeded training loop: each step samples a clip uniformly, backpropagates
// the clip loss, and applies one optimizer step. Throws NumericError when a
// loss is not finite. smoothed values average the first/last min(20, steps)
// entries.
TrainStats train_toy(ModelWeights& w, const std::vector<TrainSequence>& data,
                     const TrainConfig& cfg, const LossWeights& lw, double search_context,
                     uint64_t seed);

// "step,loss" header plus one row per step, full round-trip precision.
std::string loss_csv(const std::vector<double>& losses);

}  // namespace xtrack
