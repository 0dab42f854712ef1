// Copyright (c) 2026 The xtrack Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "xtrack/head.hpp"
#include "xtrack/tensor.hpp"

namespace xtrack {

// Scene scripts drive a closed-form renderer: every frame is a pure function
// of (script, frame index), so regenerating a sequence is byte-identical.

struct Trajectory {
    // Sinusoidal sweep per axis. Amplitude is the fraction of the free range
    // (half image extent minus half box extent); frequency counts full
    // periods over the whole clip.
    double amp_x = 0.3, amp_y = 0.3;
    double freq_x = 1.0, freq_y = 0.5;
    double phase_x = 0.0, phase_y = 0.0;
};

struct TargetSpec {
    std::string shape = "rect";     // rect | ellipse
    std::string texture = "solid";  // solid | checker | stripes
    double size = 16.0;             // base box side, pixels
    Trajectory traj;
};

struct OccluderSpec {
    int start = 0, end = 0;  // active on frames start <= t < end
    double coverage = 0.5;   // fraction of the target area hidden
};

struct Deformation {
    double scale_amp = 0.0;   // +-fraction of base size
    double aspect_amp = 0.0;  // +-fraction of aspect skew
    double period = 24.0;     // frames per full cycle
};

struct SceneScript {
    uint64_t seed = 1;
    int frames = 16;
    int width = 128, height = 128;
    TargetSpec target;
    int distractors = 0;
    std::vector<OccluderSpec> occluders;
    Deformation deform;
    std::string x_transform = "invert";  // invert | edge | threshold
    double noise_std = 0.0;

    // Strict parse: unknown keys anywhere are rejected (ValidationError).
    static SceneScript from_json(const std::string& text);
    std::string to_json() const;
    void validate() const;
};

// Analytic target box at frame t (pixel units, center format), clamped so
// the box stays inside the image.
BBox scene_target_box(const SceneScript& script, int t);

// Upper bound on the per-frame center drift (pixels) implied by the script's
// trajectory and deformation; rendering never exceeds it.
double max_scripted_speed(const SceneScript& script);

bool occluded_at(const SceneScript& script, int t);

struct RenderedFrame {
    Tensor rgb;  // [3, h, w]
    Tensor x;    // [1, h, w]
    BBox box;
    bool occluded = false;
};

RenderedFrame render_frame(const SceneScript& script, int t);

struct SequenceFrame {
    std::string rgb_path, x_path;  // relative to the sequence directory
    BBox box;
    bool occluded = false;
};

struct Sequence {
    int width = 0, height = 0;
    std::vector<SequenceFrame> frames;
};

// Writes dir/rgb/%06d.ppm, dir/x/%06d.pgm and dir/anno.json.
Sequence gen_sequence(const SceneScript& script, const std::string& dir);

// Parses dir/anno.json. Throws IoError on missing files, ValidationError on
// malformed annotations.
Sequence load_sequence(const std::string& dir);

}  // namespace xtrack
