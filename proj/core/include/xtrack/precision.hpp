// Copyright (c) 2026 The xtrack Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

namespace xtrack {

// Global numeric precision switch. Storage is always double; in F32 mode
// every kernel rounds each stored result through IEEE float, so runs are
// bit-deterministic in either mode. F64 is the default and the mode all
// oracles and gradient checks run in.
enum class Precision { F64, F32 };

Precision precision() noexcept;
void set_precision(Precision p) noexcept;

// Round a value to the active precision before storing it.
double round_store(double v) noexcept;

// RAII guard for tests that flip the mode.
class PrecisionGuard {
  public:
    explicit PrecisionGuard(Precision p) : saved_(precision()) { set_precision(p); }
    ~PrecisionGuard() { set_precision(saved_); }
    PrecisionGuard(const PrecisionGuard&) = delete;
    PrecisionGuard& operator=(const PrecisionGuard&) = delete;

  private:
    Precision saved_;
};

}  // namespace xtrack
