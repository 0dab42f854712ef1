// Copyright (c) 2026 The xtrack Authors
// SPDX-License-Identifier: Apache-2.0

#include "xtrack/fusion.hpp"

#include <cmath>

#include "xtrack/error.hpp"
#include "xtrack/ops.hpp"

namespace xtrack {

FusionWeights FusionWeights::init(Rng& rng, int d_model, int d_inner, int state_size, int conv_kernel) {
    FusionWeights w;
    w.block = MambaBlockWeights::init(rng, d_model, d_inner, state_size, conv_kernel);
    w.w_proj = Tensor::randn(rng, {2 * d_model, d_model}, 1.0 / std::sqrt(2.0 * d_model), true);
    w.b_proj = Tensor({d_model}, true);
    return w;
}

FusedFeature mamba_fuse(const Tensor& rgb, const Tensor& x, const FusionWeights& weights, Grid search_grid) {
    if (rgb.rank() != 2) throw ShapeError("mamba_fuse: expected [N,d] sequences, got " + shape_str(rgb.shape()));
    if (rgb.shape() != x.shape())
        throw AlignmentError("mamba_fuse: modality sequences disagree: " + shape_str(rgb.shape()) + " vs " +
                             shape_str(x.shape()));
    const int n = rgb.dim(0), d = rgb.dim(1);
    if (d != weights.d_model())
        throw ShapeError("mamba_fuse: token width " + std::to_string(d) + " does not match weights width " +
                         std::to_string(weights.d_model()));
    if (search_grid.first < 1 || search_grid.second < 1 || search_grid.first * search_grid.second > n)
        throw AlignmentError("mamba_fuse: search grid [" + std::to_string(search_grid.first) + "," +
                             std::to_string(search_grid.second) + "] does not fit " + std::to_string(n) + " tokens");

    Tensor scanned = mamba_block(concat_rows({rgb, x}), weights.block);
    Tensor wide = concat_cols(slice_rows(scanned, 0, n), slice_rows(scanned, n, 2 * n));
    FusedFeature f;
    f.tokens = add_rowvec(matmul(wide, weights.w_proj), weights.b_proj);
    f.search_grid = search_grid;
    return f;
}

}  // namespace xtrack
