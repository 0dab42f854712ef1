// Copyright (c) 2026 The xtrack Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>

#include "xtrack/tensor.hpp"

namespace xtrack {

using ScalarFn = std::function<double(const Tensor&)>;

// Central finite differences of a scalar-valued function, one probe pair per
// coordinate. f must be deterministic; non-finite outputs raise NumericError.
Tensor fd_gradient(const ScalarFn& f, const Tensor& x, double eps = 1e-5);

// |a-b| <= atol + rtol * max(|a|,|b|), elementwise over matching shapes.
bool allclose(const Tensor& a, const Tensor& b, double rtol, double atol = 1e-8);
bool allclose(const std::vector<double>& a, const std::vector<double>& b, double rtol, double atol = 1e-8);

// Largest violation of the allclose bound, for diagnostics.
double max_violation(const std::vector<double>& a, const std::vector<double>& b, double rtol, double atol = 1e-8);

}  // namespace xtrack
