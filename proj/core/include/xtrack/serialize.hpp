// Copyright (c) 2026 The xtrack Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <utility>
#include <vector>

#include "xtrack/model.hpp"

namespace xtrack {

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

// Weight files are a flat little-endian float32 blob at `path` plus a JSON
// manifest at `path + ".json"`:
//   {"total_bytes": N,
//    "params": [{"name": ..., "shape": [...], "offset": ...}, ...]}
// Offsets are byte positions into the blob, laid out in enumeration order.

void save_tensors(const std::string& path, const NamedTensors& params);

// Loads values into the given tensor handles (which alias model storage).
// The manifest must list exactly the same parameter names, each with the
// stored shape, and the blob length must equal total_bytes and the sum of
// the parameter extents. Throws IoError for missing/short files and
// ValidationError for any manifest mismatch.
void load_tensors(const std::string& path, const NamedTensors& params);

void save_weights(const std::string& path, const ModelWeights& w);
void load_weights(const std::string& path, ModelWeights& w);

}  // namespace xtrack
