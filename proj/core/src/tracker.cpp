// Copyright (c) 2026 The xtrack Authors
// SPDX-License-Identifier: Apache-2.0

#include "xtrack/tracker.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <utility>

#include "json.hpp"
#include "xtrack/error.hpp"
#include "xtrack/image.hpp"

namespace xtrack {

namespace {

void check_frame(const FramePair& frame) {
    const Shape& rs = frame.rgb.shape();
    const Shape& xs = frame.x.shape();
    if (rs.size() != 3 || rs[0] != 3) {
        throw ShapeError("tracker: rgb frame " + shape_str(rs) + " must be [3, h, w]");
    }
    if (xs.size() != 3 || xs[0] != 1) {
        throw ShapeError("tracker: x frame " + shape_str(xs) + " must be [1, h, w]");
    }
    if (rs[1] != xs[1] || rs[2] != xs[2]) {
        throw ShapeError("tracker: modality extents disagree, rgb " + shape_str(rs) + " vs x " +
                         shape_str(xs));
    }
    if (rs[1] < 1 || rs[2] < 1) {
        throw ShapeError("tracker: empty frame " + shape_str(rs));
    }
}

double template_context(const ModelConfig& cfg, double search_context) {
    // The template window keeps the target at the same crop fraction as the
    // search window would at the smaller resolution.
    return search_context * static_cast<double>(cfg.template_size) /
           static_cast<double>(cfg.search_size);
}

struct TemplatePair {
    Tensor rgb, x;
};

TemplatePair cut_template(const ModelWeights& w, const TrackerConfig& cfg, const FramePair& frame,
                          const BBox& box) {
    double side = crop_side(box, template_context(w.cfg, cfg.search_context));
    int ts = w.cfg.template_size;
    return {crop_resize(frame.rgb, box.cx, box.cy, side, ts),
            crop_resize(frame.x, box.cx, box.cy, side, ts)};
}

}  // namespace

void TrackerConfig::validate() const {
    if (update_interval < 1) {
        throw ConfigError("tracker config: update_interval must be >= 1, got " +
                          std::to_string(update_interval));
    }
    if (!(score_threshold >= 0.0) || !(score_threshold <= 1.0)) {
        throw ConfigError("tracker config: score_threshold must lie in [0, 1], got " +
                          std::to_string(score_threshold));
    }
    if (!(search_context > 0.0)) {
        throw ConfigError("tracker config: search_context must be positive, got " +
                          std::to_string(search_context));
    }
}

double crop_side(const BBox& box, double context) {
    double area = box.w * box.h;
    if (area <= 0.0) return 0.0;
    return context * std::sqrt(area);
}

BBox window_to_image(const BBox& normalized, double ox, double oy, double side) {
    return {ox + normalized.cx * side, oy + normalized.cy * side, normalized.w * side,
            normalized.h * side};
}

BBox clamp_box(const BBox& box, int width, int height) {
    double w = std::clamp(box.w, 1.0, static_cast<double>(width));
    double h = std::clamp(box.h, 1.0, static_cast<double>(height));
    double cx = std::clamp(box.cx, w / 2.0, width - w / 2.0);
    double cy = std::clamp(box.cy, h / 2.0, height - h / 2.0);
    return {cx, cy, w, h};
}

TrackState tracker_init(const ModelWeights& w, const TrackerConfig& cfg, const FramePair& frame,
                        const BBox& box) {
    cfg.validate();
    check_frame(frame);
    if (box.w * box.h <= 0.0) {
        throw DomainError("tracker_init: annotated box must have positive area");
    }
    int width = frame.rgb.shape()[2];
    int height = frame.rgb.shape()[1];

    TrackState state;
    state.cfg = cfg;
    state.last_box = clamp_box(box, width, height);
    TemplatePair z = cut_template(w, cfg, frame, state.last_box);
    state.z1_rgb = z.rgb;
    state.z1_x = z.x;
    state.z2_rgb = z.rgb;
    state.z2_x = z.x;
    state.q_rgb = TemporalQueue(w.cfg.queue_capacity);
    state.q_x = TemporalQueue(w.cfg.queue_capacity);
    return state;
}

TrackOutput track_frame(TrackState& state, const ModelWeights& w, const FramePair& frame) {
    check_frame(frame);
    int width = frame.rgb.shape()[2];
    int height = frame.rgb.shape()[1];
    state.frame_index += 1;

    double side = crop_side(state.last_box, state.cfg.search_context);
    double ox = state.last_box.cx - side / 2.0;
    double oy = state.last_box.cy - side / 2.0;
    bool misses = side <= 0.0 || ox >= width || oy >= height || ox + side <= 0.0 ||
                  oy + side <= 0.0;
    if (misses) {
        // Nothing to look at: hold the previous estimate with no confidence.
        state.last_score = 0.0;
        TrackOutput out;
        out.box = state.last_box;
        out.score = 0.0;
        out.degenerate = true;
        return out;
    }

    int ss = w.cfg.search_size;
    FrameInputs in;
    in.z1_rgb = state.z1_rgb;
    in.z2_rgb = state.z2_rgb;
    in.search_rgb = crop_resize(frame.rgb, state.last_box.cx, state.last_box.cy, side, ss);
    in.z1_x = state.z1_x;
    in.z2_x = state.z2_x;
    in.search_x = crop_resize(frame.x, state.last_box.cx, state.last_box.cy, side, ss);

    FrameResult r = model_forward(w, in, state.q_rgb, state.q_x);
    state.q_rgb = queue_push(state.q_rgb, r.t_cur_rgb);
    state.q_x = queue_push(state.q_x, r.t_cur_x);

    BBox img = clamp_box(window_to_image(r.box, ox, oy, side), width, height);
    state.last_box = img;
    state.last_score = r.score;

    if (state.frame_index % state.cfg.update_interval == 0 &&
        r.score > state.cfg.score_threshold) {
        TemplatePair z = cut_template(w, state.cfg, frame, img);
        state.z2_rgb = z.rgb;
        state.z2_x = z.x;
    }

    TrackOutput out;
    out.box = img;
    out.score = r.score;
    out.result = std::move(r);
    return out;
}

std::string track_record_jsonl(int frame, const BBox& box, double score) {
    auto num = [](double v) { return nlohmann::json(v).dump(); };
    std::ostringstream os;
    os << "{\"frame\": " << frame << ", \"box\": [" << num(box.cx - box.w / 2.0) << ", "
       << num(box.cy - box.h / 2.0) << ", " << num(box.w) << ", " << num(box.h)
       << "], \"score\": " << num(score) << "}";
    return os.str();
}

}  // namespace xtrack
