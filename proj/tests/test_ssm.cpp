// Copyright (c) 2026 The xtrack Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <vector>

#include "doctest.h"
#include "xtrack/gradcheck.hpp"
#include "xtrack/ops.hpp"
#include "xtrack/ssm.hpp"

#include "ref_naive.hpp"

using namespace xtrack;

namespace {

SsmParams zeroed_c(SsmParams p) {
    p.w_c = Tensor::zeros(p.w_c.shape(), true);
    return p;
}

SsmParams zeroed_c_d(SsmParams p) {
    p.w_c = Tensor::zeros(p.w_c.shape(), true);
    p.d_skip = Tensor::zeros(p.d_skip.shape(), true);
    return p;
}

}  // namespace

TEST_CASE("zoh limiting and pinned cases") {
    auto [a0_bar, b0_bar] = zoh_discretize(0.0, 0.5, 2.0);
    CHECK(a0_bar == 1.0);
    CHECK(b0_bar == 1.0);  // phi(0) = 1 -> b_bar = delta*b

    auto [a1_bar, b1_bar] = zoh_discretize(std::log(2.0), 1.0, 1.0);
    CHECK(a1_bar == doctest::Approx(2.0).epsilon(1e-14));
    const long double z = static_cast<long double>(std::log(2.0));
    CHECK(b1_bar == doctest::Approx(static_cast<double>(expm1l(z) / z)).epsilon(1e-14));

    CHECK_THROWS_AS(zoh_discretize(std::nan(""), 1.0, 1.0), NumericError);
    CHECK_THROWS_AS(zoh_discretize(-1.0, std::numeric_limits<double>::infinity(), 1.0), NumericError);
}

TEST_CASE("zoh random sweep against long-double closed form") {
    Rng rng(123);
    double worst = 0.0;
    for (int i = 0; i < 10000; ++i) {
        const double a = -std::exp(rng.uniform(std::log(1e-8), std::log(5.0)));
        const double delta = std::exp(rng.uniform(std::log(1e-4), std::log(2.0)));
        const double b = rng.uniform(-3.0, 3.0);
        auto [a_bar, b_bar] = zoh_discretize(a, delta, b);

        CHECK(a_bar > 0.0);
        CHECK(a_bar <= 1.0);

        const long double z = static_cast<long double>(delta) * static_cast<long double>(a);
        const long double a_ref = expl(z);
        const long double b_ref = (expm1l(z) / z) * static_cast<long double>(delta) * static_cast<long double>(b);
        const double rel_a = std::fabs(static_cast<double>((a_bar - a_ref) / (a_ref == 0.0L ? 1.0L : a_ref)));
        const double denom_b = std::max(1e-300, std::fabs(static_cast<double>(b_ref)));
        const double rel_b = std::fabs(static_cast<double>(b_bar - b_ref)) / denom_b;
        worst = std::max({worst, rel_a, rel_b});
    }
    CAPTURE(worst);
    CHECK(worst < 1e-10);
}

TEST_CASE("zoh continuity across the Taylor switch") {
    // Walk z through the switch at |z| = 1e-6 from both sides.
    for (double sign : {-1.0, 1.0}) {
        const double z_lo = sign * 1e-6 * (1.0 - 1e-9);
        const double z_hi = sign * 1e-6 * (1.0 + 1e-9);
        auto lo = zoh_discretize(z_lo, 1.0, 1.0);
        auto hi = zoh_discretize(z_hi, 1.0, 1.0);
        CHECK(std::fabs(lo.second - hi.second) < 1e-9);
        CHECK(std::fabs(lo.first - hi.first) < 1e-9);
    }
}

TEST_CASE("zoh_discretize_seq matches the scalar rule elementwise") {
    Rng rng(5);
    const int l = 3, d = 2, n = 4;
    std::vector<double> delta, a, b, x;
    for (int i = 0; i < l * d; ++i) delta.push_back(rng.uniform(1e-3, 1.0));
    for (int i = 0; i < d * n; ++i) a.push_back(-rng.uniform(0.5, 3.0));
    for (int i = 0; i < l * n; ++i) b.push_back(rng.uniform(-2.0, 2.0));
    for (int i = 0; i < l * d; ++i) x.push_back(rng.uniform(-2.0, 2.0));

    DiscretizedParams disc = zoh_discretize_seq(delta, a, b, x, l, d, n);
    REQUIRE(disc.a_bar.size() == static_cast<std::size_t>(l * d * n));
    for (int k = 0; k < l; ++k)
        for (int dd = 0; dd < d; ++dd)
            for (int s = 0; s < n; ++s) {
                auto [ab, bb] = zoh_discretize(a[static_cast<std::size_t>(dd) * n + s],
                                               delta[static_cast<std::size_t>(k) * d + dd],
                                               b[static_cast<std::size_t>(k) * n + s]);
                const std::size_t idx = (static_cast<std::size_t>(k) * d + dd) * n + s;
                CHECK(disc.a_bar[idx] == ab);
                CHECK(disc.b_bar_x[idx] == bb * x[static_cast<std::size_t>(k) * d + dd]);
                CHECK(disc.a_bar[idx] > 0.0);
                CHECK(disc.a_bar[idx] <= 1.0);
            }
}

TEST_CASE("ssm params init invariants") {
    Rng rng(9);
    SsmParams p = SsmParams::init(rng, 5, 4);
    p.check();
    CHECK(p.d_inner() == 5);
    CHECK(p.state_size() == 4);
    for (int dd = 0; dd < 5; ++dd)
        for (int s = 0; s < 4; ++s) {
            const double a = -std::exp(p.a_log.at2(dd, s));
            CHECK(a == doctest::Approx(-(1.0 + s)).epsilon(1e-12));  // -A spans [1, N]
            CHECK(a < 0.0);
        }
    for (int dd = 0; dd < 5; ++dd) {
        const double dt = refimpl::softplus(p.delta_bias.at(static_cast<std::size_t>(dd)));
        CHECK(dt >= 1e-3 * (1.0 - 1e-9));
        CHECK(dt <= 1e-1 * (1.0 + 1e-9));
    }
    SsmParams bad = p;
    bad.w_b = Tensor::zeros({5, 3});
    CHECK_THROWS_AS(bad.check(), ShapeError);
}

TEST_CASE("single-step recurrence matches the hand formula") {
    // L=1: y = c . (b_bar * x) + d * x with b_bar = phi(delta*a)*delta*b.
    const double a = -1.3, dt = 0.7, bb = 0.9, cc = -1.1, dd = 0.4, xv = 2.0;
    Tensor u = Tensor::from_data({1, 1}, {xv});
    Tensor delta = Tensor::from_data({1, 1}, {dt});
    Tensor b_seq = Tensor::from_data({1, 1}, {bb});
    Tensor c_seq = Tensor::from_data({1, 1}, {cc});
    Tensor a_log = Tensor::from_data({1, 1}, {std::log(-a)});
    Tensor d_skip = Tensor::from_data({1}, {dd});

    Tensor y = ssm_recurrence(u, delta, b_seq, c_seq, a_log, d_skip);
    const double b_bar = refimpl::phi(dt * a) * dt * bb;
    CHECK(y.value() == doctest::Approx(cc * b_bar * xv + dd * xv).epsilon(1e-14));
}

TEST_CASE("selective scan: skip-connection identity when C is zeroed") {
    Rng rng(17);
    SsmParams p = zeroed_c(SsmParams::init(rng, 3, 2));
    p.d_skip = Tensor::ones({3}, true);
    Tensor x = Tensor::randn(rng, {5, 3});
    Tensor y = selective_scan(x, p);
    CHECK(allclose(y.values(), x.values(), 0.0, 0.0));  // bitwise
}

TEST_CASE("selective scan matches the step-by-step reference") {
    Rng rng(29);
    SUBCASE("pinned L=6 case") {
        SsmParams p = SsmParams::init(rng, 4, 3);
        Tensor x = Tensor::randn(rng, {6, 4});
        Tensor y = selective_scan(x, p);
        CHECK(allclose(y.values(), refimpl::selective(x.values(), p, 6), 1e-6, 1e-6));
    }
    SUBCASE("shape sweep") {
        for (int rep = 0; rep < 60; ++rep) {
            const int l = 1 + static_cast<int>(rng.uniform_int(16));
            const int d = 1 + static_cast<int>(rng.uniform_int(5));
            const int n = 1 + static_cast<int>(rng.uniform_int(4));
            SsmParams p = SsmParams::init(rng, d, n);
            Tensor x = Tensor::randn(rng, {l, d});
            Tensor y = selective_scan(x, p);
            CAPTURE(l);
            CAPTURE(d);
            CAPTURE(n);
            CHECK(allclose(y.values(), refimpl::selective(x.values(), p, l), 1e-6, 1e-6));
        }
    }
}

TEST_CASE("selective scan rejects empty and misshapen input") {
    Rng rng(3);
    SsmParams p = SsmParams::init(rng, 3, 2);
    CHECK_THROWS_AS(selective_scan(Tensor::zeros({0, 3}), p), ShapeError);
    CHECK_THROWS_AS(selective_scan(Tensor::zeros({4}), p), ShapeError);
    CHECK_THROWS_AS(selective_scan(Tensor::zeros({4, 2}), p), ShapeError);  // D mismatch vs projections
}

TEST_CASE("selective scan gradients match finite differences") {
    Rng rng(31);
    const int l = 4, d = 3, n = 2;
    SsmParams params = SsmParams::init(rng, d, n);
    Tensor x0 = Tensor::randn(rng, {l, d});

    Tensor x = x0.detach();
    x.set_requires_grad(true);
    {
        Tape tape;
        tape.backward(sum_all(selective_scan(x, params)));
    }

    auto run = [&](const SsmParams& pp, const Tensor& xx) { return sum_all(selective_scan(xx, pp)).value(); };

    Tensor fd_x = fd_gradient([&](const Tensor& v) { return run(params, v); }, x0);
    CAPTURE(max_violation(x.grad(), fd_x.values(), 1e-4, 1e-7));
    CHECK(allclose(x.grad(), fd_x.values(), 1e-4, 1e-7));

    const std::vector<std::pair<const char*, Tensor SsmParams::*>> fields = {
        {"a_log", &SsmParams::a_log},   {"d_skip", &SsmParams::d_skip},       {"w_b", &SsmParams::w_b},
        {"w_c", &SsmParams::w_c},       {"w_delta", &SsmParams::w_delta},     {"delta_bias", &SsmParams::delta_bias},
    };
    for (const auto& [name, member] : fields) {
        CAPTURE(name);
        Tensor fd = fd_gradient(
            [&](const Tensor& v) {
                SsmParams q = params;
                q.*member = v;
                return run(q, x0);
            },
            (params.*member).detach());
        CAPTURE(max_violation((params.*member).grad(), fd.values(), 1e-4, 1e-7));
        CHECK(allclose((params.*member).grad(), fd.values(), 1e-4, 1e-7));
    }
}

TEST_CASE("bidirectional scan properties and reference") {
    Rng rng(37);
    const int d = 3;
    SsmParams pf = SsmParams::init(rng, d, 2);
    SsmParams pb = SsmParams::init(rng, d, 2);
    Tensor x = Tensor::randn(rng, {5, d});

    SUBCASE("nulled backward branch reduces to the forward scan") {
        Tensor y = bidirectional_scan(x, pf, zeroed_c_d(pb));
        Tensor fwd = selective_scan(x, pf);
        CHECK(allclose(y.values(), fwd.values(), 0.0, 0.0));
    }
    SUBCASE("palindromic input with shared params gives a palindromic output") {
        Rng r2(38);
        Tensor half = Tensor::randn(r2, {2, d});
        Tensor pal = concat_rows({half, reverse_rows(half)});  // rows: r0 r1 r1 r0
        Tensor y = bidirectional_scan(pal, pf, pf);
        Tensor rev = reverse_rows(y);
        CHECK(allclose(y.values(), rev.values(), 0.0, 0.0));
    }
    SUBCASE("random case matches the two-pass reference") {
        Tensor y = bidirectional_scan(x, pf, pb);
        CHECK(allclose(y.values(), refimpl::bidirectional(x.values(), pf, pb, 5), 1e-6, 1e-6));
    }
}

TEST_CASE("cross-modal scan: C exchange semantics") {
    Rng rng(41);
    const int l = 5, d = 3, n = 2;
    SsmParams pr = SsmParams::init(rng, d, n);
    SsmParams px = SsmParams::init(rng, d, n);
    Tensor xr = Tensor::randn(rng, {l, d});
    Tensor xx = Tensor::randn(rng, {l, d});

    SUBCASE("identical branches make the C swap a no-op (bitwise)") {
        auto [yr, yx] = cross_selective_scan(xr, xr, pr, pr);
        Tensor plain = selective_scan(xr, pr);
        CHECK(allclose(yr.values(), plain.values(), 0.0, 0.0));
        CHECK(allclose(yx.values(), plain.values(), 0.0, 0.0));
    }
    SUBCASE("zeroing the X branch's C projection leaves RGB with its skip path") {
        auto [yr, yx] = cross_selective_scan(xr, xx, pr, zeroed_c(px));
        (void)yx;
        std::vector<double> want(static_cast<std::size_t>(l) * d);
        for (int k = 0; k < l; ++k)
            for (int dd = 0; dd < d; ++dd)
                want[static_cast<std::size_t>(k) * d + dd] =
                    pr.d_skip.at(static_cast<std::size_t>(dd)) * xr.at2(k, dd);
        CHECK(allclose(yr.values(), want, 0.0, 1e-15));
    }
    SUBCASE("random pair matches the swap-aware reference") {
        auto [yr, yx] = cross_selective_scan(xr, xx, pr, px);
        refimpl::ScanInputs ir = refimpl::scan_inputs(xr.values(), pr, l);
        refimpl::ScanInputs ix = refimpl::scan_inputs(xx.values(), px, l);
        std::vector<double> want_r = refimpl::recurrence(xr.values(), ir.delta, ir.b, ix.c, pr, l);
        std::vector<double> want_x = refimpl::recurrence(xx.values(), ix.delta, ix.b, ir.c, px, l);
        CHECK(allclose(yr.values(), want_r, 1e-6, 1e-6));
        CHECK(allclose(yx.values(), want_x, 1e-6, 1e-6));
    }
    SUBCASE("length mismatch raises an alignment error") {
        CHECK_THROWS_AS(cross_selective_scan(xr, Tensor::zeros({l + 1, d}), pr, px), AlignmentError);
    }
}

namespace {

MambaBlockWeights zero_mamba(int dm, int di, int n, int ck) {
    Rng rng(1);
    MambaBlockWeights w = MambaBlockWeights::init(rng, dm, di, n, ck);
    for (Tensor* t : {&w.w_in, &w.b_in, &w.w_gate, &w.b_gate, &w.conv_w, &w.conv_b, &w.w_out, &w.b_out})
        *t = Tensor::zeros(t->shape(), true);
    return w;
}

}  // namespace

TEST_CASE("mamba block: residual identity with zero weights") {
    Rng rng(43);
    MambaBlockWeights w = zero_mamba(4, 6, 2, 3);
    Tensor x = Tensor::randn(rng, {5, 4});
    Tensor y = mamba_block(x, w);
    CHECK(allclose(y.values(), x.values(), 0.0, 0.0));
}

TEST_CASE("mamba block matches the composed reference") {
    Rng rng(47);
    MambaBlockWeights w = MambaBlockWeights::init(rng, 4, 6, 2, 4);
    Tensor x = Tensor::randn(rng, {4, 4});
    Tensor y = mamba_block(x, w);
    CHECK(allclose(y.values(), refimpl::mamba_block(x.values(), w, 4), 1e-6, 1e-6));
    CHECK_THROWS_AS(mamba_block(Tensor::zeros({0, 4}), w), ShapeError);
}

TEST_CASE("mamba block prefix consistency under zero padding") {
    Rng rng(53);
    MambaBlockWeights w = MambaBlockWeights::init(rng, 4, 5, 2, 4);
    // Null the backward direction so only causal paths remain.
    w.bwd = zeroed_c_d(w.bwd);
    const int l = 5;
    Tensor x = Tensor::randn(rng, {l, 4});
    Tensor xpad = concat_rows({x, Tensor::zeros({l, 4})});

    Tensor y = mamba_block(x, w);
    Tensor ypad = mamba_block(xpad, w);
    // Prefix outputs are bitwise unchanged: conv is causal, the forward scan
    // never looks ahead, and gate/projections are per position.
    for (int k = 0; k < l; ++k)
        for (int j = 0; j < 4; ++j) CHECK(y.at2(k, j) == ypad.at2(k, j));
    // And the padded case still matches the full reference.
    CHECK(allclose(ypad.values(), refimpl::mamba_block(xpad.values(), w, 2 * l), 1e-6, 1e-6));
}

TEST_CASE("mamba block gradient matches finite differences") {
    Rng rng(59);
    MambaBlockWeights w = MambaBlockWeights::init(rng, 3, 4, 2, 3);
    Tensor x0 = Tensor::randn(rng, {3, 3});

    Tensor x = x0.detach();
    x.set_requires_grad(true);
    {
        Tape tape;
        tape.backward(sum_all(mamba_block(x, w)));
    }
    Tensor fd_x = fd_gradient([&](const Tensor& v) { return sum_all(mamba_block(v, w)).value(); }, x0);
    CAPTURE(max_violation(x.grad(), fd_x.values(), 1e-4, 1e-7));
    CHECK(allclose(x.grad(), fd_x.values(), 1e-4, 1e-7));

    Tensor fd_win = fd_gradient(
        [&](const Tensor& v) {
            MambaBlockWeights q = w;
            q.w_in = v;
            return sum_all(mamba_block(x0, q)).value();
        },
        w.w_in.detach());
    CHECK(allclose(w.w_in.grad(), fd_win.values(), 1e-4, 1e-7));
}

TEST_CASE("cross mamba block equals the plain block on identical branches") {
    Rng rng(61);
    MambaBlockWeights w = MambaBlockWeights::init(rng, 4, 5, 2, 4);
    Tensor x = Tensor::randn(rng, {6, 4});
    auto [yr, yx] = cross_mamba_block(x, x, w, w);
    Tensor plain = mamba_block(x, w);
    CHECK(allclose(yr.values(), plain.values(), 0.0, 0.0));
    CHECK(allclose(yx.values(), plain.values(), 0.0, 0.0));
    CHECK_THROWS_AS(cross_mamba_block(x, Tensor::zeros({3, 4}), w, w), AlignmentError);
}

TEST_CASE("chunked scan equals the sequential recurrence") {
    Rng rng(67);
    const int l = 37, d = 3, n = 4;
    std::vector<double> delta, a, b, c, x, d_skip;
    for (int i = 0; i < l * d; ++i) delta.push_back(rng.uniform(1e-3, 1.0));
    for (int i = 0; i < d * n; ++i) a.push_back(-rng.uniform(0.3, 3.0));
    for (int i = 0; i < l * n; ++i) b.push_back(rng.uniform(-2.0, 2.0));
    for (int i = 0; i < l * n; ++i) c.push_back(rng.uniform(-2.0, 2.0));
    for (int i = 0; i < l * d; ++i) x.push_back(rng.uniform(-2.0, 2.0));
    for (int i = 0; i < d; ++i) d_skip.push_back(rng.uniform(-1.0, 1.0));

    DiscretizedParams disc = zoh_discretize_seq(delta, a, b, x, l, d, n);

    // Sequential reference directly off the discretized parameters.
    std::vector<double> want(static_cast<std::size_t>(l) * d, 0.0);
    {
        std::vector<double> h(static_cast<std::size_t>(d) * n, 0.0);
        for (int k = 0; k < l; ++k)
            for (int dd = 0; dd < d; ++dd) {
                double acc = 0.0;
                for (int s = 0; s < n; ++s) {
                    const std::size_t idx = (static_cast<std::size_t>(k) * d + dd) * n + s;
                    auto& hv = h[static_cast<std::size_t>(dd) * n + s];
                    hv = disc.a_bar[idx] * hv + disc.b_bar_x[idx];
                    acc += c[static_cast<std::size_t>(k) * n + s] * hv;
                }
                want[static_cast<std::size_t>(k) * d + dd] =
                    acc + d_skip[static_cast<std::size_t>(dd)] * x[static_cast<std::size_t>(k) * d + dd];
            }
    }

    for (int chunk : {1, 3, 16, 64}) {
        for (int threads : {1, 2}) {
            CAPTURE(chunk);
            CAPTURE(threads);
            std::vector<double> got = scan_chunked(disc, c, d_skip, x, chunk, threads);
            CHECK(allclose(got, want, 1e-5, 1e-5));
        }
    }
}
