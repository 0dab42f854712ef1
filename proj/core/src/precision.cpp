// Copyright (c) 2026 The xtrack Authors
// SPDX-License-Identifier: Apache-2.0

#include "xtrack/precision.hpp"

namespace xtrack {

namespace {
Precision g_precision = Precision::F64;
}

Precision precision() noexcept { return g_precision; }

void set_precision(Precision p) noexcept { g_precision = p; }

double round_store(double v) noexcept {
    if (g_precision == Precision::F32) return static_cast<double>(static_cast<float>(v));
    return v;
}

}  // namespace xtrack
