// Copyright (c) 2026 The xtrack Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

#include "xtrack/model.hpp"

namespace xtrack {

struct TrackerConfig {
    int update_interval = 25;      // dynamic template refresh cadence (frames)
    double score_threshold = 0.7;  // minimum confidence for a refresh
    double search_context = 2.0;   // search window scale over sqrt(box area)

    void validate() const;  // throws ConfigError
};

struct FramePair {
    Tensor rgb;  // [3, H, W]
    Tensor x;    // [1, H, W]
};

struct TrackState {
    TrackerConfig cfg;
    Tensor z1_rgb, z1_x;  // fixed template, never rewritten
    Tensor z2_rgb, z2_x;  // dynamic template
    TemporalQueue q_rgb, q_x;
    BBox last_box;  // image pixels, center format
    double last_score = 1.0;
    int frame_index = 0;  // frames processed since init
};

// Square crop side under a context factor: context * sqrt(box area).
double crop_side(const BBox& box, double context);

// Maps a normalized in-window box to image pixels given the window origin
// and side.
BBox window_to_image(const BBox& normalized, double ox, double oy, double side);

// Clamps extents to [1, image extent] and recenters so the box lies fully
// inside the image.
BBox clamp_box(const BBox& box, int width, int height);

// Cuts both templates from the first frame at the annotated box. The
// template window uses search_context scaled by template_size/search_size,
// so the target occupies the same fraction of both crop kinds.
TrackState tracker_init(const ModelWeights& w, const TrackerConfig& cfg, const FramePair& frame,
                        const BBox& box);

struct TrackOutput {
    BBox box;  // image pixels
    double score = 0.0;
    bool degenerate = false;  // search window missed the image; model skipped
    FrameResult result;       // default-initialized when degenerate
};

// One tracking step: crop the search window at the last box, run the model,
// map the decoded box back, clamp, push the temporal tokens, and refresh the
// dynamic template every update_interval frames when the score clears the
// threshold. A window that misses the image entirely keeps the previous box
// with zero confidence and leaves the queues untouched.
TrackOutput track_frame(TrackState& state, const ModelWeights& w, const FramePair& frame);

// One output line per frame: {"frame": i, "box": [x, y, w, h], "score": s},
// box in top-left pixel convention.
std::string track_record_jsonl(int frame, const BBox& box, double score);

}  // namespace xtrack
