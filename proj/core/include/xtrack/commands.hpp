// Copyright (c) 2026 The xtrack Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

#include "xtrack/config.hpp"

namespace xtrack {

// Exit codes shared by every command: 0 success, 1 runtime failure
// (divergence, internal numeric errors), 2 unusable input (parse errors,
// validation failures, missing files).
inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitBadInput = 2;

struct CliOptions {
    std::string config_path;       // empty = built-in defaults
    std::optional<uint64_t> seed;  // overrides the config (or script) seed
    std::string precision = "f64";
};

struct DumpOptions {
    bool attention = false;
    bool masks = false;
};

// Loads the config (defaults when no path) and applies the seed override.
RunConfig resolve_config(const CliOptions& opts);

// Rounds every parameter through 32-bit floats; "f64" leaves them untouched.
// Arithmetic always runs in 64-bit; the flag pins the weight precision.
void apply_precision(ModelWeights& w, const std::string& precision);

// Renders a scene script into out_dir (rgb/%06d.ppm, x/%06d.pgm, anno.json).
int cmd_gen(const std::string& script_path, const std::string& out_dir,
            std::optional<uint64_t> seed_override, std::ostream& log);

// Seeded toy training over every sequence found under data_dir; writes the
// weight blob + manifest to out_weights and a per-step loss CSV next to it
// (out_weights + ".loss.csv").
int cmd_train_toy(const CliOptions& opts, const std::string& data_dir,
                  const std::string& out_weights, std::ostream& log);

// Runs the tracker over a generated sequence, writing one JSON line per
// frame. Dumps, when enabled, land under out_file + ".dumps/".
int cmd_track(const CliOptions& opts, const std::string& weights_path,
              const std::string& seq_dir, const std::string& out_file, const DumpOptions& dumps,
              std::ostream& log);

// Scores tracker output against a sequence's annotations; prints the summary
// and, when report_path is non-empty, writes the full metrics JSON.
int cmd_eval(const std::string& results_path, const std::string& seq_dir,
             const std::string& report_path, std::ostream& log);

// Compiled-in invariant suite: one pass/fail line per check plus a summary
// count; exits nonzero on any failure.
int cmd_check(std::ostream& log);

}  // namespace xtrack
