// Copyright (c) 2026 The xtrack Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "xtrack/tensor.hpp"

namespace xtrack {

// Differentiable primitive ops. All of them validate shapes, compute the
// forward value rounded to the active precision, and record a backward rule
// on the active tape when any input participates in gradients.

// -- elementwise, same shape --------------------------------------------
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor min_ew(const Tensor& a, const Tensor& b);  // ties pick a's side
Tensor max_ew(const Tensor& a, const Tensor& b);  // ties pick a's side

// -- scalar broadcasts ---------------------------------------------------
Tensor add_scalar(const Tensor& a, double c);
Tensor mul_scalar(const Tensor& a, double c);

// -- elementwise unary ----------------------------------------------------
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);  // throws DomainError on non-positive input
Tensor abs(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor softplus(const Tensor& a);
Tensor silu(const Tensor& a);
Tensor gelu(const Tensor& a);
Tensor clamp(const Tensor& a, double lo, double hi);

// -- linear algebra -------------------------------------------------------
Tensor matmul(const Tensor& a, const Tensor& b);         // [M,K]x[K,N]
Tensor add_rowvec(const Tensor& a, const Tensor& v);     // [M,N]+[N] per row
Tensor transpose2d(const Tensor& a);                     // [M,N]->[N,M]

// -- normalization / attention pieces -------------------------------------
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);
Tensor softmax_rows(const Tensor& x);  // rows sum to 1; max-subtracted

// -- convolutions ----------------------------------------------------------
// Depthwise causal 1-D conv over [L,D] with kernel [K,D] and bias [D].
Tensor conv1d_depthwise_causal(const Tensor& x, const Tensor& w, const Tensor& bias);
// 2-D conv, stride 1, odd square kernel, same padding. x [Cin,H,W],
// w [Cout,Cin,k,k], bias [Cout].
Tensor conv2d_same(const Tensor& x, const Tensor& w, const Tensor& bias);
// Per-channel normalization over the spatial extent of [C,H,W].
Tensor channel_norm2d(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);

// -- shape moves ------------------------------------------------------------
Tensor reshape(const Tensor& a, Shape shape);
Tensor slice_rows(const Tensor& a, int r0, int r1);  // [M,N] -> [r1-r0,N]
Tensor slice_cols(const Tensor& a, int c0, int c1);  // [M,N] -> [M,c1-c0]
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor concat_cols(const Tensor& a, const Tensor& b);
Tensor gather_rows(const Tensor& a, const std::vector<int>& idx);  // scatter-add on backward
Tensor reverse_rows(const Tensor& a);
// Multiply each row by a constant factor (no gradient to the factors).
Tensor scale_rows(const Tensor& a, const std::vector<double>& factors);

// -- reductions --------------------------------------------------------------
Tensor sum_all(const Tensor& a);   // -> [1]
Tensor mean_all(const Tensor& a);  // -> [1]

}  // namespace xtrack
