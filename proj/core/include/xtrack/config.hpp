// Copyright (c) 2026 The xtrack Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>

#include "xtrack/head.hpp"
#include "xtrack/model.hpp"
#include "xtrack/tracker.hpp"
#include "xtrack/trainer.hpp"

namespace xtrack {

// One JSON document configuring a whole run. Every field has a usable
// default; unknown keys anywhere are rejected.
struct RunConfig {
    uint64_t seed = 1;
    ModelConfig model;
    TrackerConfig tracker;
    TrainConfig train;
    LossWeights loss;

    // Strict parse + full validation (ValidationError on malformed or
    // unknown keys, ConfigError on out-of-range values).
    static RunConfig from_json(const std::string& text);
    static RunConfig from_file(const std::string& path);  // IoError when missing
    std::string to_json() const;
    void validate() const;
};

}  // namespace xtrack
