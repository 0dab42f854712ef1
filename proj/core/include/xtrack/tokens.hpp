// Copyright (c) 2026 The xtrack Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <utility>

#include "xtrack/tensor.hpp"

namespace xtrack {

// Grid dimensions as (rows, cols).
using Grid = std::pair<int, int>;

enum class Modality { RGB, X };

// Region bookkeeping for the token sequence [Z | S | T]: two templates,
// search, then up to m temporal tokens.
struct TokenLayout {
    int n_z = 0;      // template tokens across both templates
    int n_s = 0;      // search tokens
    int n_t = 0;      // temporal tokens currently present
    int d_model = 0;  // channel width
    Grid grid_z{0, 0};  // token grid per single template
    Grid grid_s{0, 0};  // search token grid

    int length() const { return n_z + n_s + n_t; }
    int search_begin() const { return n_z; }
    int search_end() const { return n_z + n_s; }
    int temporal_begin() const { return n_z + n_s; }

    // Throws ShapeError when the region counts disagree with the grids.
    void check() const;

    bool operator==(const TokenLayout& o) const = default;
};

struct ModalityTokens {
    Tensor tokens;  // [length, d_model]
    TokenLayout layout;
    Modality modality = Modality::RGB;

    // Throws AlignmentError when tokens do not match the layout.
    void check() const;
};

// Head-averaged attention of one layer for one modality, detached from the
// gradient tape. Row = query index, column = key index over the full
// sequence; scoring consumes the {template, temporal} x {search} slices.
struct AttentionRecord {
    Tensor avg;  // [length, length]
    TokenLayout layout;

    Tensor wz() const;  // [n_z, n_s] template rows x search columns
    Tensor wt() const;  // [n_t, n_s] temporal rows x search columns
};

}  // namespace xtrack
