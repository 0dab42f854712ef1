// Copyright (c) 2026 The xtrack Authors
// SPDX-License-Identifier: Apache-2.0
//
// End-to-end costs at the default toy configuration: one model forward, one
// tracker step over a rendered frame and one training step (clip loss plus
// backward pass).

#include <benchmark/benchmark.h>

#include <vector>

#include "xtrack/model.hpp"
#include "xtrack/rng.hpp"
#include "xtrack/synth.hpp"
#include "xtrack/tracker.hpp"
#include "xtrack/trainer.hpp"

using namespace xtrack;

namespace {

FrameInputs random_inputs(Rng& rng, const ModelConfig& cfg) {
    FrameInputs in;
    in.z1_rgb = Tensor::randn(rng, {3, cfg.template_size, cfg.template_size});
    in.z2_rgb = Tensor::randn(rng, {3, cfg.template_size, cfg.template_size});
    in.search_rgb = Tensor::randn(rng, {3, cfg.search_size, cfg.search_size});
    in.z1_x = Tensor::randn(rng, {1, cfg.template_size, cfg.template_size});
    in.z2_x = Tensor::randn(rng, {1, cfg.template_size, cfg.template_size});
    in.search_x = Tensor::randn(rng, {1, cfg.search_size, cfg.search_size});
    return in;
}

void BM_ModelForward(benchmark::State& state) {
    Rng rng(67);
    const ModelConfig cfg;
    ModelWeights w = ModelWeights::init(rng, cfg);
    FrameInputs in = random_inputs(rng, cfg);
    TemporalQueue q_rgb(cfg.queue_capacity), q_x(cfg.queue_capacity);
    for (int i = 0; i < 2; ++i) {
        q_rgb = queue_push(q_rgb, Tensor::randn(rng, {cfg.d_model}, 0.1));
        q_x = queue_push(q_x, Tensor::randn(rng, {cfg.d_model}, 0.1));
    }
    for (auto _ : state) {
        FrameResult r = model_forward(w, in, q_rgb, q_x);
        benchmark::DoNotOptimize(r.score);
        benchmark::DoNotOptimize(r.head.cls_map.values().data());
    }
}

void BM_TrackFrame(benchmark::State& state) {
    Rng rng(71);
    const ModelConfig cfg;
    ModelWeights w = ModelWeights::init(rng, cfg);

    SceneScript script;
    script.seed = 7;
    script.frames = 2;
    script.width = 128;
    script.height = 128;
    script.target.size = 24.0;
    RenderedFrame f0 = render_frame(script, 0);
    RenderedFrame f1 = render_frame(script, 1);
    TrackState init = tracker_init(w, TrackerConfig{}, {f0.rgb, f0.x}, f0.box);

    for (auto _ : state) {
        TrackState st = init;  // handles share storage; the copy is cheap
        TrackOutput out = track_frame(st, w, {f1.rgb, f1.x});
        benchmark::DoNotOptimize(out.score);
    }
}

void BM_TrainStep(benchmark::State& state) {
    Rng rng(73);
    const ModelConfig cfg;
    ModelWeights w = ModelWeights::init(rng, cfg);

    SceneScript script;
    script.seed = 7;
    script.frames = 3;
    script.width = 128;
    script.height = 128;
    script.target.size = 24.0;
    TrainSequence seq;
    seq.width = script.width;
    seq.height = script.height;
    for (int t = 0; t < script.frames; ++t) {
        RenderedFrame f = render_frame(script, t);
        seq.frames.push_back({f.rgb, f.x});
        seq.boxes.push_back(f.box);
    }
    std::vector<ClipFrame> clip = build_clip(seq, 0, 3, cfg, TrackerConfig{}.search_context);
    const LossWeights lw;
    SgdMomentum opt(w, 0.0, 0.9);  // lr 0 keeps the benchmark state stationary

    for (auto _ : state) {
        w.zero_grad();
        double loss_val = 0.0;
        {
            Tape tape;
            Tensor loss = clip_loss(w, clip, lw);
            loss_val = loss.value();
            tape.backward(loss);
        }
        opt.step(w);
        benchmark::DoNotOptimize(loss_val);
    }
}

BENCHMARK(BM_ModelForward)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_TrackFrame)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_TrainStep)->Unit(benchmark::kMillisecond);

}  // namespace
