// Copyright (c) 2026 The xtrack Authors
// SPDX-License-Identifier: Apache-2.0
//
// Hot-path kernels of the state-space core: discretization, the selective
// scan at growing sequence lengths, the cross-branch variant and the
// threaded chunked evaluator.

#include <benchmark/benchmark.h>

#include <vector>

#include "xtrack/rng.hpp"
#include "xtrack/ssm.hpp"
#include "xtrack/tensor.hpp"

using namespace xtrack;

namespace {

constexpr int kDInner = 64;
constexpr int kState = 8;

struct ScanCase {
    SsmParams params;
    Tensor x;

    ScanCase(int l, uint64_t seed) : params{[&] {
        Rng rng(seed);
        return SsmParams::init(rng, kDInner, kState);
    }()} {
        Rng rng(seed + 1);
        x = Tensor::randn(rng, {l, kDInner});
    }
};

void BM_ZohDiscretizeSeq(benchmark::State& state) {
    const int l = static_cast<int>(state.range(0));
    Rng rng(11);
    std::vector<double> delta, a, b, x;
    for (int i = 0; i < l * kDInner; ++i) delta.push_back(rng.uniform(1e-3, 1.0));
    for (int i = 0; i < kDInner * kState; ++i) a.push_back(-rng.uniform(0.1, 3.0));
    for (int i = 0; i < l * kState; ++i) b.push_back(rng.uniform(-2.0, 2.0));
    for (int i = 0; i < l * kDInner; ++i) x.push_back(rng.uniform(-2.0, 2.0));
    for (auto _ : state) {
        DiscretizedParams disc = zoh_discretize_seq(delta, a, b, x, l, kDInner, kState);
        benchmark::DoNotOptimize(disc.b_bar_x.data());
    }
    state.SetItemsProcessed(state.iterations() * l * kDInner * kState);
}

void BM_SelectiveScan(benchmark::State& state) {
    ScanCase c(static_cast<int>(state.range(0)), 13);
    for (auto _ : state) {
        Tensor y = selective_scan(c.x, c.params);
        benchmark::DoNotOptimize(y.values().data());
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_BidirectionalScan(benchmark::State& state) {
    ScanCase c(static_cast<int>(state.range(0)), 17);
    Rng rng(18);
    SsmParams bwd = SsmParams::init(rng, kDInner, kState);
    for (auto _ : state) {
        Tensor y = bidirectional_scan(c.x, c.params, bwd);
        benchmark::DoNotOptimize(y.values().data());
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_CrossSelectiveScan(benchmark::State& state) {
    const int l = static_cast<int>(state.range(0));
    ScanCase rgb(l, 19), x(l, 23);
    for (auto _ : state) {
        auto [yr, yx] = cross_selective_scan(rgb.x, x.x, rgb.params, x.params);
        benchmark::DoNotOptimize(yr.values().data());
        benchmark::DoNotOptimize(yx.values().data());
    }
    state.SetItemsProcessed(state.iterations() * l * 2);
}

void BM_MambaBlock(benchmark::State& state) {
    const int l = static_cast<int>(state.range(0));
    Rng rng(29);
    MambaBlockWeights w = MambaBlockWeights::init(rng, 32, kDInner, kState, 4);
    Tensor x = Tensor::randn(rng, {l, 32});
    for (auto _ : state) {
        Tensor y = mamba_block(x, w);
        benchmark::DoNotOptimize(y.values().data());
    }
    state.SetItemsProcessed(state.iterations() * l);
}

void BM_ScanChunkedThreads(benchmark::State& state) {
    const int l = 4096;
    const int threads = static_cast<int>(state.range(0));
    Rng rng(31);
    std::vector<double> delta, a, b, c, x, d_skip;
    for (int i = 0; i < l * kDInner; ++i) delta.push_back(rng.uniform(1e-3, 1.0));
    for (int i = 0; i < kDInner * kState; ++i) a.push_back(-rng.uniform(0.1, 3.0));
    for (int i = 0; i < l * kState; ++i) b.push_back(rng.uniform(-2.0, 2.0));
    for (int i = 0; i < l * kState; ++i) c.push_back(rng.uniform(-2.0, 2.0));
    for (int i = 0; i < l * kDInner; ++i) x.push_back(rng.uniform(-2.0, 2.0));
    for (int i = 0; i < kDInner; ++i) d_skip.push_back(rng.uniform(-1.0, 1.0));
    DiscretizedParams disc = zoh_discretize_seq(delta, a, b, x, l, kDInner, kState);
    for (auto _ : state) {
        std::vector<double> y = scan_chunked(disc, c, d_skip, x, 64, threads);
        benchmark::DoNotOptimize(y.data());
    }
    state.SetItemsProcessed(state.iterations() * l);
}

BENCHMARK(BM_ZohDiscretizeSeq)->Arg(64)->Arg(256)->Arg(1024);
BENCHMARK(BM_SelectiveScan)->Arg(16)->Arg(64)->Arg(256)->Arg(1024);
BENCHMARK(BM_BidirectionalScan)->Arg(64)->Arg(256);
BENCHMARK(BM_CrossSelectiveScan)->Arg(64)->Arg(256);
BENCHMARK(BM_MambaBlock)->Arg(16)->Arg(64)->Arg(256);
BENCHMARK(BM_ScanChunkedThreads)->Arg(1)->Arg(2)->Arg(4);

}  // namespace
