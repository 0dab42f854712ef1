// Copyright (c) 2026 The xtrack Authors
// SPDX-License-Identifier: Apache-2.0

#include "xtrack/tokens.hpp"

#include "xtrack/ops.hpp"

namespace xtrack {

void TokenLayout::check() const {
    if (d_model < 1) throw ShapeError("TokenLayout: d_model must be >= 1");
    if (n_z != 2 * grid_z.first * grid_z.second)
        throw ShapeError("TokenLayout: n_z " + std::to_string(n_z) + " does not cover two " +
                         std::to_string(grid_z.first) + "x" + std::to_string(grid_z.second) + " templates");
    if (n_s != grid_s.first * grid_s.second)
        throw ShapeError("TokenLayout: n_s " + std::to_string(n_s) + " does not match the " +
                         std::to_string(grid_s.first) + "x" + std::to_string(grid_s.second) + " search grid");
    if (n_t < 0) throw ShapeError("TokenLayout: negative temporal count");
}

void ModalityTokens::check() const {
    layout.check();
    if (tokens.rank() != 2 || tokens.dim(0) != layout.length() || tokens.dim(1) != layout.d_model)
        throw AlignmentError("ModalityTokens: tokens " + shape_str(tokens.shape()) + " do not tile the layout [" +
                             std::to_string(layout.length()) + "," + std::to_string(layout.d_model) + "]");
}

Tensor AttentionRecord::wz() const {
    return slice_cols(slice_rows(avg, 0, layout.n_z), layout.search_begin(), layout.search_end());
}

Tensor AttentionRecord::wt() const {
    return slice_cols(slice_rows(avg, layout.temporal_begin(), layout.length()), layout.search_begin(),
                      layout.search_end());
}

}  // namespace xtrack
