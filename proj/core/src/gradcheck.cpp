// Copyright (c) 2026 The xtrack Authors
// SPDX-License-Identifier: Apache-2.0

#include "xtrack/gradcheck.hpp"

#include <cmath>

namespace xtrack {

Tensor fd_gradient(const ScalarFn& f, const Tensor& x, double eps) {
    if (!(eps > 0.0)) throw DomainError("fd_gradient: eps must be positive");
    Tensor grad(x.shape());
    std::vector<double> probe = x.values();
    for (std::size_t i = 0; i < probe.size(); ++i) {
        const double orig = probe[i];
        probe[i] = orig + eps;
        const double fp = f(Tensor::from_data(x.shape(), probe));
        probe[i] = orig - eps;
        const double fm = f(Tensor::from_data(x.shape(), probe));
        probe[i] = orig;
        if (!std::isfinite(fp) || !std::isfinite(fm)) throw NumericError("fd_gradient: non-finite function value");
        grad.data()[i] = (fp - fm) / (2.0 * eps);
    }
    return grad;
}

bool allclose(const std::vector<double>& a, const std::vector<double>& b, double rtol, double atol) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double tol = atol + rtol * std::max(std::fabs(a[i]), std::fabs(b[i]));
        if (!(std::fabs(a[i] - b[i]) <= tol)) return false;
    }
    return true;
}

bool allclose(const Tensor& a, const Tensor& b, double rtol, double atol) {
    if (a.shape() != b.shape()) return false;
    return allclose(a.values(), b.values(), rtol, atol);
}

double max_violation(const std::vector<double>& a, const std::vector<double>& b, double rtol, double atol) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size() && i < b.size(); ++i) {
        const double tol = atol + rtol * std::max(std::fabs(a[i]), std::fabs(b[i]));
        worst = std::max(worst, std::fabs(a[i] - b[i]) - tol);
    }
    return worst;
}

}  // namespace xtrack
