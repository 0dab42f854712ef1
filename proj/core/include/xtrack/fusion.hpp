// Copyright (c) 2026 The xtrack Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "xtrack/ssm.hpp"
#include "xtrack/tokens.hpp"

namespace xtrack {

// Joint feature fed to the prediction head: template tokens first, then the
// search tokens row-major over search_grid.
struct FusedFeature {
    Tensor tokens;  // [n_z + n_s, d_model]
    Grid search_grid{0, 0};
};

struct FusionWeights {
    MambaBlockWeights block;  // scans the token-concatenated joint sequence
    Tensor w_proj;            // [2*d_model, d_model]
    Tensor b_proj;            // [d_model]

    static FusionWeights init(Rng& rng, int d_model, int d_inner, int state_size, int conv_kernel);
    int d_model() const { return block.d_model(); }
};

// Token-concatenates [rgb; x], runs the bidirectional block over the joint
// sequence, splits the halves, channel-concatenates them and projects back
// to d_model.
FusedFeature mamba_fuse(const Tensor& rgb, const Tensor& x, const FusionWeights& weights, Grid search_grid);

}  // namespace xtrack
