// Copyright (c) 2026 The xtrack Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <utility>
#include <vector>

#include "xtrack/ops.hpp"
#include "xtrack/tensor.hpp"

namespace xtrack {

// Selective state-space parameters for one scan direction. The diagonal
// evolution matrix is stored as a_log with A = -exp(a_log), so the realized
// A is strictly negative and exp(delta*A) stays in (0,1] for delta > 0.
struct SsmParams {
    Tensor a_log;       // [D_inner, N]
    Tensor d_skip;      // [D_inner]
    Tensor w_b;         // [D_inner, N]   input -> B
    Tensor w_c;         // [D_inner, N]   input -> C
    Tensor w_delta;     // [D_inner, D_inner]
    Tensor delta_bias;  // [D_inner]

    static SsmParams init(Rng& rng, int d_inner, int n);

    int d_inner() const { return a_log.dim(0); }
    int state_size() const { return a_log.dim(1); }
    void check() const;  // throws ShapeError when projections disagree
};

// ZOH discretization of one (a, delta, b) triple:
//   a_bar = exp(delta*a),  b_bar = phi(delta*a) * delta * b,
// phi(z) = (exp(z)-1)/z with a Taylor branch below |z| = 1e-6.
std::pair<double, double> zoh_discretize(double a, double delta, double b);

// Discretized parameters for a whole sequence, laid out [L, D_inner, N].
struct DiscretizedParams {
    int l = 0, d_inner = 0, n = 0;
    std::vector<double> a_bar;
    std::vector<double> b_bar_x;  // b_bar pre-multiplied by the input x
};

// Vectorized discretization. delta [L*D], a [D*N] (realized, negative),
// b [L*N], x [L*D].
DiscretizedParams zoh_discretize_seq(const std::vector<double>& delta, const std::vector<double>& a,
                                     const std::vector<double>& b, const std::vector<double>& x, int l, int d, int n);

// Fused differentiable recurrence:
//   h^k = exp(delta^k a) h^{k-1} + phi(delta^k a) delta^k B^k x^k
//   y^k = <C^k, h^k_d> + d_skip_d x^k_d
// u [L,D], delta [L,D] (already positive), b_seq/c_seq [L,N],
// a_log [D,N], d_skip [D]. Records one tape node with an analytic backward.
Tensor ssm_recurrence(const Tensor& u, const Tensor& delta, const Tensor& b_seq, const Tensor& c_seq,
                      const Tensor& a_log, const Tensor& d_skip);

// Selective scan: B, C, delta derived from x through the projections in
// params (delta through softplus, so it is positive).
Tensor selective_scan(const Tensor& x, const SsmParams& params);

// Forward scan plus a reversed scan with its own parameters, summed.
Tensor bidirectional_scan(const Tensor& x, const SsmParams& params_fwd, const SsmParams& params_bwd);

// Each branch runs its own recurrence but reads out with the other branch's
// per-step C. Returns (y_rgb, y_x).
std::pair<Tensor, Tensor> cross_selective_scan(const Tensor& x_rgb, const Tensor& x_x, const SsmParams& params_rgb,
                                               const SsmParams& params_x);

// Full mamba block: in-projection, causal depthwise conv, SiLU, scan,
// SiLU gate, out-projection, residual.
struct MambaBlockWeights {
    Tensor w_in, b_in;      // [D_model, D_inner], [D_inner]
    Tensor w_gate, b_gate;  // [D_model, D_inner], [D_inner]
    Tensor conv_w, conv_b;  // [K, D_inner], [D_inner]
    SsmParams fwd, bwd;
    Tensor w_out, b_out;  // [D_inner, D_model], [D_model]

    static MambaBlockWeights init(Rng& rng, int d_model, int d_inner, int n, int conv_k = 4);
    int d_model() const { return w_in.dim(0); }
    int d_inner() const { return w_in.dim(1); }
};

Tensor mamba_block(const Tensor& x, const MambaBlockWeights& w);

// Cross-modal bidirectional mamba block; the scans exchange C per direction.
std::pair<Tensor, Tensor> cross_mamba_block(const Tensor& x_rgb, const Tensor& x_x, const MambaBlockWeights& w_rgb,
                                            const MambaBlockWeights& w_x);

// Forward-only chunked evaluation of the discretized recurrence, optionally
// threaded over channels. Same result as the sequential scan up to rounding.
// Returns y [L*D]. c_seq [L*N], d_skip [D], x [L*D].
std::vector<double> scan_chunked(const DiscretizedParams& disc, const std::vector<double>& c_seq,
                                 const std::vector<double>& d_skip, const std::vector<double>& x, int chunk = 16,
                                 int threads = 1);

}  // namespace xtrack
