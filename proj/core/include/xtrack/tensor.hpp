// Copyright (c) 2026 The xtrack Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "xtrack/error.hpp"
#include "xtrack/rng.hpp"

namespace xtrack {

using Shape = std::vector<int>;

std::string shape_str(const Shape& s);
std::size_t shape_numel(const Shape& s);

namespace detail {

struct TensorNode {
    Shape shape;
    std::vector<double> val;
    std::vector<double> grad;  // empty until a backward pass touches the node
    bool requires_grad = false;

    void ensure_grad() {
        if (grad.size() != val.size()) grad.assign(val.size(), 0.0);
    }
};

}  // namespace detail

// Dense row-major tensor handle with value semantics on the handle and
// shared storage underneath. Values are immutable once an op has produced
// them; only grad buffers accumulate.
class Tensor {
  public:
    Tensor() = default;
    explicit Tensor(Shape shape, bool requires_grad = false);

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor ones(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double v, bool requires_grad = false);
    static Tensor scalar(double v, bool requires_grad = false);
    static Tensor from_data(Shape shape, std::vector<double> data, bool requires_grad = false);
    static Tensor randn(Rng& rng, Shape shape, double stddev = 1.0, bool requires_grad = false);

    bool defined() const { return static_cast<bool>(p_); }
    const Shape& shape() const { return p_->shape; }
    int rank() const { return static_cast<int>(p_->shape.size()); }
    int dim(int i) const { return p_->shape[static_cast<std::size_t>(i)]; }
    std::size_t numel() const { return p_->val.size(); }

    double* data() { return p_->val.data(); }
    const double* data() const { return p_->val.data(); }
    std::vector<double>& values() { return p_->val; }
    const std::vector<double>& values() const { return p_->val; }

    double at(std::size_t i) const { return p_->val[i]; }
    double at2(int r, int c) const {  // rank-2 convenience
        return p_->val[static_cast<std::size_t>(r) * static_cast<std::size_t>(p_->shape[1]) + static_cast<std::size_t>(c)];
    }
    // Value of a one-element tensor.
    double value() const;

    bool requires_grad() const { return p_->requires_grad; }
    Tensor& set_requires_grad(bool b) {
        p_->requires_grad = b;
        return *this;
    }

    bool has_grad() const { return !p_->grad.empty(); }
    const std::vector<double>& grad() const;
    std::vector<double>& grad_mut() { return p_->grad; }
    void zero_grad() {
        if (!p_->grad.empty()) p_->grad.assign(p_->val.size(), 0.0);
    }

    // Same values, no grad participation, independent storage.
    Tensor detach() const;

    bool all_finite() const;

    std::shared_ptr<detail::TensorNode> node() const { return p_; }

  private:
    std::shared_ptr<detail::TensorNode> p_;
};

// Reverse-mode tape. Ops append entries in execution order while a tape is
// active; backward() replays them once, in reverse, then drops them. A tape
// is single-owner: never share one across threads. Independent tapes on
// different threads are fine.
class Tape {
  public:
    Tape();
    ~Tape();
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    static Tape* active() noexcept;

    void record(std::vector<std::shared_ptr<detail::TensorNode>> nodes, std::function<void()> backward);

    // Seeds d(loss)/d(loss) = 1 and replays the tape in reverse. The tape
    // is freed afterwards; each recorded node ends up with a populated grad.
    void backward(const Tensor& loss);

    std::size_t size() const { return entries_.size(); }

  private:
    struct Entry {
        std::vector<std::shared_ptr<detail::TensorNode>> nodes;
        std::function<void()> fn;
    };
    std::vector<Entry> entries_;
    Tape* prev_ = nullptr;
    bool consumed_ = false;
};

// True when gradients should be tracked for this input right now.
inline bool tracked(const Tensor& t) {
    return Tape::active() != nullptr && t.requires_grad();
}

}  // namespace xtrack
