// Copyright (c) 2026 The xtrack Authors
// SPDX-License-Identifier: Apache-2.0

#include "xtrack/tensor.hpp"

#include <cmath>

namespace xtrack {

std::string shape_str(const Shape& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(s[i]);
    }
    out += "]";
    return out;
}

std::size_t shape_numel(const Shape& s) {
    std::size_t n = 1;
    for (int d : s) {
        if (d < 0) throw ShapeError("negative extent in " + shape_str(s));
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

Tensor::Tensor(Shape shape, bool requires_grad) {
    p_ = std::make_shared<detail::TensorNode>();
    p_->val.assign(shape_numel(shape), 0.0);
    p_->shape = std::move(shape);
    p_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return Tensor(std::move(shape), requires_grad); }

Tensor Tensor::ones(Shape shape, bool requires_grad) { return full(std::move(shape), 1.0, requires_grad); }

Tensor Tensor::full(Shape shape, double v, bool requires_grad) {
    Tensor t(std::move(shape), requires_grad);
    for (auto& x : t.p_->val) x = v;
    return t;
}

Tensor Tensor::scalar(double v, bool requires_grad) { return full({1}, v, requires_grad); }

Tensor Tensor::from_data(Shape shape, std::vector<double> data, bool requires_grad) {
    if (shape_numel(shape) != data.size())
        throw ShapeError("from_data: " + shape_str(shape) + " does not hold " + std::to_string(data.size()) + " values");
    Tensor t;
    t.p_ = std::make_shared<detail::TensorNode>();
    t.p_->shape = std::move(shape);
    t.p_->val = std::move(data);
    t.p_->requires_grad = requires_grad;
    return t;
}

Tensor Tensor::randn(Rng& rng, Shape shape, double stddev, bool requires_grad) {
    Tensor t(std::move(shape), requires_grad);
    for (auto& x : t.p_->val) x = rng.normal(0.0, stddev);
    return t;
}

double Tensor::value() const {
    if (numel() != 1) throw ShapeError("value(): tensor " + shape_str(shape()) + " is not a scalar");
    return p_->val[0];
}

const std::vector<double>& Tensor::grad() const {
    if (p_->grad.empty()) throw NumericError("grad(): no gradient populated; run backward first");
    return p_->grad;
}

Tensor Tensor::detach() const {
    Tensor t;
    t.p_ = std::make_shared<detail::TensorNode>();
    t.p_->shape = p_->shape;
    t.p_->val = p_->val;
    t.p_->requires_grad = false;
    return t;
}

bool Tensor::all_finite() const {
    for (double v : p_->val)
        if (!std::isfinite(v)) return false;
    return true;
}

namespace {
thread_local Tape* g_active_tape = nullptr;
}

Tape::Tape() {
    prev_ = g_active_tape;
    g_active_tape = this;
}

Tape::~Tape() { g_active_tape = prev_; }

Tape* Tape::active() noexcept { return g_active_tape; }

void Tape::record(std::vector<std::shared_ptr<detail::TensorNode>> nodes, std::function<void()> backward) {
    entries_.push_back(Entry{std::move(nodes), std::move(backward)});
}

void Tape::backward(const Tensor& loss) {
    if (consumed_) throw NumericError("backward(): tape already consumed");
    if (loss.numel() != 1) throw ShapeError("backward(): loss must be scalar, got " + shape_str(loss.shape()));
    consumed_ = true;

    for (auto& e : entries_)
        for (auto& n : e.nodes) n->ensure_grad();

    auto ln = loss.node();
    ln->ensure_grad();
    ln->grad[0] = 1.0;

    for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) it->fn();
    entries_.clear();
}

}  // namespace xtrack
