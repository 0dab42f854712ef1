// Copyright (c) 2026 The xtrack Authors
// SPDX-License-Identifier: Apache-2.0

#include "xtrack/ops.hpp"

#include <cmath>

#include "xtrack/precision.hpp"

namespace xtrack {

namespace {

constexpr double kInvSqrt2 = 0.7071067811865476;
constexpr double kInvSqrt2Pi = 0.3989422804014327;

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape())
        throw ShapeError(std::string(op) + ": " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

void check_rank2(const Tensor& a, const char* op) {
    if (a.rank() != 2) throw ShapeError(std::string(op) + ": expected rank-2, got " + shape_str(a.shape()));
}

double stable_softplus(double x) {
    if (x > 30.0) return x;
    if (x < -30.0) return std::exp(x);
    return std::log1p(std::exp(x));
}

double sigmoid_d(double x) { return 1.0 / (1.0 + std::exp(-x)); }

using NodePtr = std::shared_ptr<detail::TensorNode>;

// Shared skeleton for elementwise binary ops.
template <typename Fwd, typename Bwd>
Tensor binary_op(const Tensor& a, const Tensor& b, const char* name, Fwd fwd, Bwd bwd) {
    check_same_shape(a, b, name);
    const bool rg = tracked(a) || tracked(b);
    Tensor out(a.shape(), rg);
    const std::size_t n = out.numel();
    const double* av = a.data();
    const double* bv = b.data();
    double* ov = out.data();
    for (std::size_t i = 0; i < n; ++i) ov[i] = round_store(fwd(av[i], bv[i]));
    if (rg) {
        NodePtr an = a.node(), bn = b.node(), on = out.node();
        Tape::active()->record({an, bn, on}, [an, bn, on, bwd, n] {
            for (std::size_t i = 0; i < n; ++i) {
                double da = 0.0, db = 0.0;
                bwd(an->val[i], bn->val[i], on->val[i], on->grad[i], da, db);
                if (an->requires_grad) an->grad[i] += da;
                if (bn->requires_grad) bn->grad[i] += db;
            }
        });
    }
    return out;
}

template <typename Fwd, typename Bwd>
Tensor unary_op(const Tensor& a, Fwd fwd, Bwd bwd) {
    const bool rg = tracked(a);
    Tensor out(a.shape(), rg);
    const std::size_t n = out.numel();
    const double* av = a.data();
    double* ov = out.data();
    for (std::size_t i = 0; i < n; ++i) ov[i] = round_store(fwd(av[i]));
    if (rg) {
        NodePtr an = a.node(), on = out.node();
        Tape::active()->record({an, on}, [an, on, bwd, n] {
            for (std::size_t i = 0; i < n; ++i) an->grad[i] += on->grad[i] * bwd(an->val[i], on->val[i]);
        });
    }
    return out;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    return binary_op(
        a, b, "add", [](double x, double y) { return x + y; },
        [](double, double, double, double g, double& da, double& db) {
            da = g;
            db = g;
        });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    return binary_op(
        a, b, "sub", [](double x, double y) { return x - y; },
        [](double, double, double, double g, double& da, double& db) {
            da = g;
            db = -g;
        });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    return binary_op(
        a, b, "mul", [](double x, double y) { return x * y; },
        [](double x, double y, double, double g, double& da, double& db) {
            da = g * y;
            db = g * x;
        });
}

Tensor div(const Tensor& a, const Tensor& b) {
    return binary_op(
        a, b, "div", [](double x, double y) { return x / y; },
        [](double x, double y, double, double g, double& da, double& db) {
            da = g / y;
            db = -g * x / (y * y);
        });
}

Tensor min_ew(const Tensor& a, const Tensor& b) {
    return binary_op(
        a, b, "min_ew", [](double x, double y) { return x <= y ? x : y; },
        [](double x, double y, double, double g, double& da, double& db) {
            if (x <= y)
                da = g;
            else
                db = g;
        });
}

Tensor max_ew(const Tensor& a, const Tensor& b) {
    return binary_op(
        a, b, "max_ew", [](double x, double y) { return x >= y ? x : y; },
        [](double x, double y, double, double g, double& da, double& db) {
            if (x >= y)
                da = g;
            else
                db = g;
        });
}

Tensor add_scalar(const Tensor& a, double c) {
    return unary_op(
        a, [c](double x) { return x + c; }, [](double, double) { return 1.0; });
}

Tensor mul_scalar(const Tensor& a, double c) {
    return unary_op(
        a, [c](double x) { return x * c; }, [c](double, double) { return c; });
}

Tensor exp(const Tensor& a) {
    return unary_op(
        a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& a) {
    for (std::size_t i = 0; i < a.numel(); ++i)
        if (a.at(i) <= 0.0) throw DomainError("log: non-positive input " + std::to_string(a.at(i)));
    return unary_op(
        a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Tensor abs(const Tensor& a) {
    return unary_op(
        a, [](double x) { return std::fabs(x); },
        [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Tensor relu(const Tensor& a) {
    return unary_op(
        a, [](double x) { return x > 0.0 ? x : 0.0; }, [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor sigmoid(const Tensor& a) {
    return unary_op(
        a, [](double x) { return sigmoid_d(x); }, [](double, double y) { return y * (1.0 - y); });
}

Tensor softplus(const Tensor& a) {
    return unary_op(
        a, [](double x) { return stable_softplus(x); }, [](double x, double) { return sigmoid_d(x); });
}

Tensor silu(const Tensor& a) {
    return unary_op(
        a, [](double x) { return x * sigmoid_d(x); },
        [](double x, double) {
            double s = sigmoid_d(x);
            return s * (1.0 + x * (1.0 - s));
        });
}

Tensor gelu(const Tensor& a) {
    return unary_op(
        a, [](double x) { return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)); },
        [](double x, double) {
            return 0.5 * (1.0 + std::erf(x * kInvSqrt2)) + x * kInvSqrt2Pi * std::exp(-0.5 * x * x);
        });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
    if (lo > hi) throw DomainError("clamp: lo > hi");
    return unary_op(
        a, [lo, hi](double x) { return x < lo ? lo : (x > hi ? hi : x); },
        [lo, hi](double x, double) { return (x >= lo && x <= hi) ? 1.0 : 0.0; });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    check_rank2(a, "matmul");
    check_rank2(b, "matmul");
    const int m = a.dim(0), k = a.dim(1), k2 = b.dim(0), n = b.dim(1);
    if (k != k2)
        throw ShapeError("matmul: inner dimensions disagree: " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
    const bool rg = tracked(a) || tracked(b);
    Tensor out({m, n}, rg);
    const double* av = a.data();
    const double* bv = b.data();
    double* ov = out.data();
    // i-k-j order keeps both b and out rows hot.
    for (int i = 0; i < m; ++i) {
        double* orow = ov + static_cast<std::size_t>(i) * n;
        const double* arow = av + static_cast<std::size_t>(i) * k;
        for (int kk = 0; kk < k; ++kk) {
            const double s = arow[kk];
            if (s == 0.0) continue;
            const double* brow = bv + static_cast<std::size_t>(kk) * n;
            for (int j = 0; j < n; ++j) orow[j] += s * brow[j];
        }
    }
    if (precision() == Precision::F32)
        for (std::size_t i = 0; i < out.numel(); ++i) ov[i] = round_store(ov[i]);
    if (rg) {
        NodePtr an = a.node(), bn = b.node(), on = out.node();
        Tape::active()->record({an, bn, on}, [an, bn, on, m, k, n] {
            const auto& g = on->grad;
            if (an->requires_grad) {
                // dA = G * B^T
                for (int i = 0; i < m; ++i)
                    for (int j = 0; j < n; ++j) {
                        const double gv = g[static_cast<std::size_t>(i) * n + j];
                        if (gv == 0.0) continue;
                        for (int kk = 0; kk < k; ++kk)
                            an->grad[static_cast<std::size_t>(i) * k + kk] +=
                                gv * bn->val[static_cast<std::size_t>(kk) * n + j];
                    }
            }
            if (bn->requires_grad) {
                // dB = A^T * G
                for (int i = 0; i < m; ++i)
                    for (int kk = 0; kk < k; ++kk) {
                        const double av2 = an->val[static_cast<std::size_t>(i) * k + kk];
                        if (av2 == 0.0) continue;
                        for (int j = 0; j < n; ++j)
                            bn->grad[static_cast<std::size_t>(kk) * n + j] +=
                                av2 * g[static_cast<std::size_t>(i) * n + j];
                    }
            }
        });
    }
    return out;
}

Tensor add_rowvec(const Tensor& a, const Tensor& v) {
    check_rank2(a, "add_rowvec");
    if (v.rank() != 1 || v.dim(0) != a.dim(1))
        throw ShapeError("add_rowvec: " + shape_str(a.shape()) + " vs " + shape_str(v.shape()));
    const int m = a.dim(0), n = a.dim(1);
    const bool rg = tracked(a) || tracked(v);
    Tensor out({m, n}, rg);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j)
            out.data()[static_cast<std::size_t>(i) * n + j] =
                round_store(a.at2(i, j) + v.at(static_cast<std::size_t>(j)));
    if (rg) {
        NodePtr an = a.node(), vn = v.node(), on = out.node();
        Tape::active()->record({an, vn, on}, [an, vn, on, m, n] {
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < n; ++j) {
                    const double g = on->grad[static_cast<std::size_t>(i) * n + j];
                    if (an->requires_grad) an->grad[static_cast<std::size_t>(i) * n + j] += g;
                    if (vn->requires_grad) vn->grad[static_cast<std::size_t>(j)] += g;
                }
        });
    }
    return out;
}

Tensor transpose2d(const Tensor& a) {
    check_rank2(a, "transpose2d");
    const int m = a.dim(0), n = a.dim(1);
    const bool rg = tracked(a);
    Tensor out({n, m}, rg);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) out.data()[static_cast<std::size_t>(j) * m + i] = a.at2(i, j);
    if (rg) {
        NodePtr an = a.node(), on = out.node();
        Tape::active()->record({an, on}, [an, on, m, n] {
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < n; ++j)
                    an->grad[static_cast<std::size_t>(i) * n + j] += on->grad[static_cast<std::size_t>(j) * m + i];
        });
    }
    return out;
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
    check_rank2(x, "layer_norm");
    const int m = x.dim(0), n = x.dim(1);
    if (gamma.rank() != 1 || gamma.dim(0) != n || beta.rank() != 1 || beta.dim(0) != n)
        throw ShapeError("layer_norm: affine params must be [" + std::to_string(n) + "]");
    const bool rg = tracked(x) || tracked(gamma) || tracked(beta);
    Tensor out({m, n}, rg);
    std::vector<double> mu(m), inv_sigma(m);
    for (int i = 0; i < m; ++i) {
        const double* row = x.data() + static_cast<std::size_t>(i) * n;
        double s = 0.0;
        for (int j = 0; j < n; ++j) s += row[j];
        const double mean = s / n;
        double var = 0.0;
        for (int j = 0; j < n; ++j) var += (row[j] - mean) * (row[j] - mean);
        var /= n;
        mu[i] = mean;
        inv_sigma[i] = 1.0 / std::sqrt(var + eps);
        for (int j = 0; j < n; ++j) {
            const double xhat = (row[j] - mean) * inv_sigma[i];
            out.data()[static_cast<std::size_t>(i) * n + j] = round_store(gamma.at(j) * xhat + beta.at(j));
        }
    }
    if (rg) {
        NodePtr xn = x.node(), gn = gamma.node(), bn = beta.node(), on = out.node();
        Tape::active()->record({xn, gn, bn, on}, [xn, gn, bn, on, m, n, mu, inv_sigma] {
            for (int i = 0; i < m; ++i) {
                const double* row = xn->val.data() + static_cast<std::size_t>(i) * n;
                const double* g = on->grad.data() + static_cast<std::size_t>(i) * n;
                double sum_gg = 0.0, sum_ggx = 0.0;
                for (int j = 0; j < n; ++j) {
                    const double xhat = (row[j] - mu[i]) * inv_sigma[i];
                    const double gg = g[j] * gn->val[static_cast<std::size_t>(j)];
                    sum_gg += gg;
                    sum_ggx += gg * xhat;
                    if (gn->requires_grad) gn->grad[static_cast<std::size_t>(j)] += g[j] * xhat;
                    if (bn->requires_grad) bn->grad[static_cast<std::size_t>(j)] += g[j];
                }
                if (xn->requires_grad) {
                    for (int j = 0; j < n; ++j) {
                        const double xhat = (row[j] - mu[i]) * inv_sigma[i];
                        const double gg = g[j] * gn->val[static_cast<std::size_t>(j)];
                        xn->grad[static_cast<std::size_t>(i) * n + j] +=
                            inv_sigma[i] * (gg - sum_gg / n - xhat * sum_ggx / n);
                    }
                }
            }
        });
    }
    return out;
}

Tensor softmax_rows(const Tensor& x) {
    check_rank2(x, "softmax_rows");
    if (!x.all_finite()) throw NumericError("softmax_rows: non-finite input");
    const int m = x.dim(0), n = x.dim(1);
    const bool rg = tracked(x);
    Tensor out({m, n}, rg);
    for (int i = 0; i < m; ++i) {
        const double* row = x.data() + static_cast<std::size_t>(i) * n;
        double* orow = out.data() + static_cast<std::size_t>(i) * n;
        double mx = row[0];
        for (int j = 1; j < n; ++j) mx = std::max(mx, row[j]);
        double s = 0.0;
        for (int j = 0; j < n; ++j) {
            orow[j] = std::exp(row[j] - mx);
            s += orow[j];
        }
        for (int j = 0; j < n; ++j) orow[j] = round_store(orow[j] / s);
    }
    if (rg) {
        NodePtr xn = x.node(), on = out.node();
        Tape::active()->record({xn, on}, [xn, on, m, n] {
            for (int i = 0; i < m; ++i) {
                const double* y = on->val.data() + static_cast<std::size_t>(i) * n;
                const double* g = on->grad.data() + static_cast<std::size_t>(i) * n;
                double dot = 0.0;
                for (int j = 0; j < n; ++j) dot += y[j] * g[j];
                for (int j = 0; j < n; ++j) xn->grad[static_cast<std::size_t>(i) * n + j] += y[j] * (g[j] - dot);
            }
        });
    }
    return out;
}

Tensor conv1d_depthwise_causal(const Tensor& x, const Tensor& w, const Tensor& bias) {
    check_rank2(x, "conv1d_depthwise_causal");
    check_rank2(w, "conv1d_depthwise_causal");
    const int l = x.dim(0), d = x.dim(1), k = w.dim(0);
    if (w.dim(1) != d || bias.rank() != 1 || bias.dim(0) != d)
        throw ShapeError("conv1d_depthwise_causal: kernel " + shape_str(w.shape()) + " does not match input " +
                         shape_str(x.shape()));
    const bool rg = tracked(x) || tracked(w) || tracked(bias);
    Tensor out({l, d}, rg);
    for (int t = 0; t < l; ++t)
        for (int c = 0; c < d; ++c) {
            double acc = bias.at(static_cast<std::size_t>(c));
            for (int j = 0; j < k; ++j) {
                const int src = t - (k - 1) + j;
                if (src >= 0) acc += w.at2(j, c) * x.at2(src, c);
            }
            out.data()[static_cast<std::size_t>(t) * d + c] = round_store(acc);
        }
    if (rg) {
        NodePtr xn = x.node(), wn = w.node(), bn = bias.node(), on = out.node();
        Tape::active()->record({xn, wn, bn, on}, [xn, wn, bn, on, l, d, k] {
            for (int t = 0; t < l; ++t)
                for (int c = 0; c < d; ++c) {
                    const double g = on->grad[static_cast<std::size_t>(t) * d + c];
                    if (g == 0.0) continue;
                    if (bn->requires_grad) bn->grad[static_cast<std::size_t>(c)] += g;
                    for (int j = 0; j < k; ++j) {
                        const int src = t - (k - 1) + j;
                        if (src < 0) continue;
                        if (wn->requires_grad)
                            wn->grad[static_cast<std::size_t>(j) * d + c] +=
                                g * xn->val[static_cast<std::size_t>(src) * d + c];
                        if (xn->requires_grad)
                            xn->grad[static_cast<std::size_t>(src) * d + c] +=
                                g * wn->val[static_cast<std::size_t>(j) * d + c];
                    }
                }
        });
    }
    return out;
}

Tensor conv2d_same(const Tensor& x, const Tensor& w, const Tensor& bias) {
    if (x.rank() != 3) throw ShapeError("conv2d_same: input must be [C,H,W], got " + shape_str(x.shape()));
    if (w.rank() != 4) throw ShapeError("conv2d_same: kernel must be [Cout,Cin,k,k], got " + shape_str(w.shape()));
    const int cin = x.dim(0), h = x.dim(1), ww = x.dim(2);
    const int cout = w.dim(0), k = w.dim(2);
    if (w.dim(1) != cin || w.dim(3) != k || (k % 2) == 0)
        throw ShapeError("conv2d_same: kernel " + shape_str(w.shape()) + " does not match input " +
                         shape_str(x.shape()));
    if (bias.rank() != 1 || bias.dim(0) != cout) throw ShapeError("conv2d_same: bias must be [Cout]");
    const int pad = (k - 1) / 2;
    const bool rg = tracked(x) || tracked(w) || tracked(bias);
    Tensor out({cout, h, ww}, rg);
    auto xat = [&](int c, int r, int col) {
        return x.data()[(static_cast<std::size_t>(c) * h + r) * ww + col];
    };
    for (int oc = 0; oc < cout; ++oc)
        for (int r = 0; r < h; ++r)
            for (int col = 0; col < ww; ++col) {
                double acc = bias.at(static_cast<std::size_t>(oc));
                for (int ic = 0; ic < cin; ++ic)
                    for (int kr = 0; kr < k; ++kr) {
                        const int sr = r + kr - pad;
                        if (sr < 0 || sr >= h) continue;
                        for (int kc = 0; kc < k; ++kc) {
                            const int sc = col + kc - pad;
                            if (sc < 0 || sc >= ww) continue;
                            acc += w.data()[((static_cast<std::size_t>(oc) * cin + ic) * k + kr) * k + kc] *
                                   xat(ic, sr, sc);
                        }
                    }
                out.data()[(static_cast<std::size_t>(oc) * h + r) * ww + col] = round_store(acc);
            }
    if (rg) {
        NodePtr xn = x.node(), wn = w.node(), bn = bias.node(), on = out.node();
        Tape::active()->record({xn, wn, bn, on}, [xn, wn, bn, on, cin, cout, h, ww, k, pad] {
            for (int oc = 0; oc < cout; ++oc)
                for (int r = 0; r < h; ++r)
                    for (int col = 0; col < ww; ++col) {
                        const double g = on->grad[(static_cast<std::size_t>(oc) * h + r) * ww + col];
                        if (g == 0.0) continue;
                        if (bn->requires_grad) bn->grad[static_cast<std::size_t>(oc)] += g;
                        for (int ic = 0; ic < cin; ++ic)
                            for (int kr = 0; kr < k; ++kr) {
                                const int sr = r + kr - pad;
                                if (sr < 0 || sr >= h) continue;
                                for (int kc = 0; kc < k; ++kc) {
                                    const int sc = col + kc - pad;
                                    if (sc < 0 || sc >= ww) continue;
                                    const std::size_t wi =
                                        ((static_cast<std::size_t>(oc) * cin + ic) * k + kr) * k + kc;
                                    const std::size_t xi = (static_cast<std::size_t>(ic) * h + sr) * ww + sc;
                                    if (wn->requires_grad) wn->grad[wi] += g * xn->val[xi];
                                    if (xn->requires_grad) xn->grad[xi] += g * wn->val[wi];
                                }
                            }
                    }
        });
    }
    return out;
}

Tensor channel_norm2d(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
    if (x.rank() != 3) throw ShapeError("channel_norm2d: input must be [C,H,W], got " + shape_str(x.shape()));
    const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
    const int hw = h * w;
    if (gamma.rank() != 1 || gamma.dim(0) != c || beta.rank() != 1 || beta.dim(0) != c)
        throw ShapeError("channel_norm2d: affine params must be [" + std::to_string(c) + "]");
    const bool rg = tracked(x) || tracked(gamma) || tracked(beta);
    Tensor out(x.shape(), rg);
    std::vector<double> mu(c), inv_sigma(c);
    for (int ch = 0; ch < c; ++ch) {
        const double* plane = x.data() + static_cast<std::size_t>(ch) * hw;
        double s = 0.0;
        for (int i = 0; i < hw; ++i) s += plane[i];
        const double mean = s / hw;
        double var = 0.0;
        for (int i = 0; i < hw; ++i) var += (plane[i] - mean) * (plane[i] - mean);
        var /= hw;
        mu[ch] = mean;
        inv_sigma[ch] = 1.0 / std::sqrt(var + eps);
        for (int i = 0; i < hw; ++i)
            out.data()[static_cast<std::size_t>(ch) * hw + i] =
                round_store(gamma.at(static_cast<std::size_t>(ch)) * (plane[i] - mean) * inv_sigma[ch] +
                            beta.at(static_cast<std::size_t>(ch)));
    }
    if (rg) {
        NodePtr xn = x.node(), gn = gamma.node(), bn = beta.node(), on = out.node();
        Tape::active()->record({xn, gn, bn, on}, [xn, gn, bn, on, c, hw, mu, inv_sigma] {
            for (int ch = 0; ch < c; ++ch) {
                const double* plane = xn->val.data() + static_cast<std::size_t>(ch) * hw;
                const double* g = on->grad.data() + static_cast<std::size_t>(ch) * hw;
                double sum_g = 0.0, sum_gx = 0.0;
                for (int i = 0; i < hw; ++i) {
                    const double xhat = (plane[i] - mu[ch]) * inv_sigma[ch];
                    sum_g += g[i];
                    sum_gx += g[i] * xhat;
                    if (gn->requires_grad) gn->grad[static_cast<std::size_t>(ch)] += g[i] * xhat;
                    if (bn->requires_grad) bn->grad[static_cast<std::size_t>(ch)] += g[i];
                }
                if (xn->requires_grad) {
                    const double gamma_v = gn->val[static_cast<std::size_t>(ch)];
                    for (int i = 0; i < hw; ++i) {
                        const double xhat = (plane[i] - mu[ch]) * inv_sigma[ch];
                        xn->grad[static_cast<std::size_t>(ch) * hw + i] +=
                            gamma_v * inv_sigma[ch] * (g[i] - sum_g / hw - xhat * sum_gx / hw);
                    }
                }
            }
        });
    }
    return out;
}

Tensor reshape(const Tensor& a, Shape shape) {
    if (shape_numel(shape) != a.numel())
        throw ShapeError("reshape: " + shape_str(a.shape()) + " -> " + shape_str(shape));
    const bool rg = tracked(a);
    Tensor out = Tensor::from_data(std::move(shape), a.values(), rg);
    if (rg) {
        NodePtr an = a.node(), on = out.node();
        Tape::active()->record({an, on}, [an, on] {
            for (std::size_t i = 0; i < an->grad.size(); ++i) an->grad[i] += on->grad[i];
        });
    }
    return out;
}

Tensor slice_rows(const Tensor& a, int r0, int r1) {
    check_rank2(a, "slice_rows");
    const int m = a.dim(0), n = a.dim(1);
    if (r0 < 0 || r1 > m || r0 > r1) throw ShapeError("slice_rows: [" + std::to_string(r0) + "," + std::to_string(r1) + ") of " + shape_str(a.shape()));
    const bool rg = tracked(a);
    Tensor out({r1 - r0, n}, rg);
    std::copy(a.data() + static_cast<std::size_t>(r0) * n, a.data() + static_cast<std::size_t>(r1) * n, out.data());
    if (rg) {
        NodePtr an = a.node(), on = out.node();
        Tape::active()->record({an, on}, [an, on, r0, n] {
            const std::size_t cnt = on->grad.size();
            for (std::size_t i = 0; i < cnt; ++i) an->grad[static_cast<std::size_t>(r0) * n + i] += on->grad[i];
        });
    }
    return out;
}

Tensor slice_cols(const Tensor& a, int c0, int c1) {
    check_rank2(a, "slice_cols");
    const int m = a.dim(0), n = a.dim(1);
    if (c0 < 0 || c1 > n || c0 > c1) throw ShapeError("slice_cols: [" + std::to_string(c0) + "," + std::to_string(c1) + ") of " + shape_str(a.shape()));
    const int w = c1 - c0;
    const bool rg = tracked(a);
    Tensor out({m, w}, rg);
    for (int i = 0; i < m; ++i)
        std::copy(a.data() + static_cast<std::size_t>(i) * n + c0, a.data() + static_cast<std::size_t>(i) * n + c1,
                  out.data() + static_cast<std::size_t>(i) * w);
    if (rg) {
        NodePtr an = a.node(), on = out.node();
        Tape::active()->record({an, on}, [an, on, m, n, c0, w] {
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < w; ++j)
                    an->grad[static_cast<std::size_t>(i) * n + c0 + j] += on->grad[static_cast<std::size_t>(i) * w + j];
        });
    }
    return out;
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw ShapeError("concat_rows: no parts");
    const int n = parts[0].dim(1);
    int m = 0;
    bool rg = false;
    for (const auto& p : parts) {
        check_rank2(p, "concat_rows");
        if (p.dim(1) != n) throw ShapeError("concat_rows: column mismatch " + shape_str(p.shape()));
        m += p.dim(0);
        rg = rg || tracked(p);
    }
    Tensor out({m, n}, rg);
    std::size_t off = 0;
    for (const auto& p : parts) {
        std::copy(p.data(), p.data() + p.numel(), out.data() + off);
        off += p.numel();
    }
    if (rg) {
        std::vector<NodePtr> nodes;
        for (const auto& p : parts) nodes.push_back(p.node());
        NodePtr on = out.node();
        auto all = nodes;
        all.push_back(on);
        Tape::active()->record(all, [nodes, on] {
            std::size_t off2 = 0;
            for (const auto& pn : nodes) {
                const std::size_t cnt = pn->val.size();
                if (pn->requires_grad)
                    for (std::size_t i = 0; i < cnt; ++i) pn->grad[i] += on->grad[off2 + i];
                off2 += cnt;
            }
        });
    }
    return out;
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
    check_rank2(a, "concat_cols");
    check_rank2(b, "concat_cols");
    if (a.dim(0) != b.dim(0))
        throw ShapeError("concat_cols: row mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    const int m = a.dim(0), na = a.dim(1), nb = b.dim(1);
    const bool rg = tracked(a) || tracked(b);
    Tensor out({m, na + nb}, rg);
    for (int i = 0; i < m; ++i) {
        std::copy(a.data() + static_cast<std::size_t>(i) * na, a.data() + static_cast<std::size_t>(i + 1) * na,
                  out.data() + static_cast<std::size_t>(i) * (na + nb));
        std::copy(b.data() + static_cast<std::size_t>(i) * nb, b.data() + static_cast<std::size_t>(i + 1) * nb,
                  out.data() + static_cast<std::size_t>(i) * (na + nb) + na);
    }
    if (rg) {
        NodePtr an = a.node(), bn = b.node(), on = out.node();
        Tape::active()->record({an, bn, on}, [an, bn, on, m, na, nb] {
            for (int i = 0; i < m; ++i) {
                if (an->requires_grad)
                    for (int j = 0; j < na; ++j)
                        an->grad[static_cast<std::size_t>(i) * na + j] +=
                            on->grad[static_cast<std::size_t>(i) * (na + nb) + j];
                if (bn->requires_grad)
                    for (int j = 0; j < nb; ++j)
                        bn->grad[static_cast<std::size_t>(i) * nb + j] +=
                            on->grad[static_cast<std::size_t>(i) * (na + nb) + na + j];
            }
        });
    }
    return out;
}

Tensor gather_rows(const Tensor& a, const std::vector<int>& idx) {
    check_rank2(a, "gather_rows");
    const int m = a.dim(0), n = a.dim(1);
    for (int i : idx)
        if (i < 0 || i >= m) throw ShapeError("gather_rows: index " + std::to_string(i) + " out of " + shape_str(a.shape()));
    const bool rg = tracked(a);
    Tensor out({static_cast<int>(idx.size()), n}, rg);
    for (std::size_t r = 0; r < idx.size(); ++r)
        std::copy(a.data() + static_cast<std::size_t>(idx[r]) * n, a.data() + static_cast<std::size_t>(idx[r] + 1) * n,
                  out.data() + r * n);
    if (rg) {
        NodePtr an = a.node(), on = out.node();
        Tape::active()->record({an, on}, [an, on, idx, n] {
            for (std::size_t r = 0; r < idx.size(); ++r)
                for (int j = 0; j < n; ++j)
                    an->grad[static_cast<std::size_t>(idx[r]) * n + j] += on->grad[r * n + j];
        });
    }
    return out;
}

Tensor reverse_rows(const Tensor& a) {
    check_rank2(a, "reverse_rows");
    const int m = a.dim(0);
    std::vector<int> idx(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) idx[static_cast<std::size_t>(i)] = m - 1 - i;
    return gather_rows(a, idx);
}

Tensor scale_rows(const Tensor& a, const std::vector<double>& factors) {
    check_rank2(a, "scale_rows");
    const int m = a.dim(0), n = a.dim(1);
    if (static_cast<int>(factors.size()) != m)
        throw AlignmentError("scale_rows: " + std::to_string(factors.size()) + " factors for " + shape_str(a.shape()));
    const bool rg = tracked(a);
    Tensor out({m, n}, rg);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j)
            out.data()[static_cast<std::size_t>(i) * n + j] = round_store(a.at2(i, j) * factors[static_cast<std::size_t>(i)]);
    if (rg) {
        NodePtr an = a.node(), on = out.node();
        Tape::active()->record({an, on}, [an, on, factors, m, n] {
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < n; ++j)
                    an->grad[static_cast<std::size_t>(i) * n + j] +=
                        on->grad[static_cast<std::size_t>(i) * n + j] * factors[static_cast<std::size_t>(i)];
        });
    }
    return out;
}

Tensor sum_all(const Tensor& a) {
    const bool rg = tracked(a);
    double s = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i) s += a.at(i);
    Tensor out = Tensor::from_data({1}, {round_store(s)}, rg);
    if (rg) {
        NodePtr an = a.node(), on = out.node();
        Tape::active()->record({an, on}, [an, on] {
            const double g = on->grad[0];
            for (std::size_t i = 0; i < an->grad.size(); ++i) an->grad[i] += g;
        });
    }
    return out;
}

Tensor mean_all(const Tensor& a) {
    if (a.numel() == 0) throw ShapeError("mean_all: empty tensor");
    const bool rg = tracked(a);
    double s = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i) s += a.at(i);
    const double inv = 1.0 / static_cast<double>(a.numel());
    Tensor out = Tensor::from_data({1}, {round_store(s * inv)}, rg);
    if (rg) {
        NodePtr an = a.node(), on = out.node();
        Tape::active()->record({an, on}, [an, on, inv] {
            const double g = on->grad[0] * inv;
            for (std::size_t i = 0; i < an->grad.size(); ++i) an->grad[i] += g;
        });
    }
    return out;
}

}  // namespace xtrack
