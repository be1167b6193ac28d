/*
 * Copyright (c) 2026 the gearsim authors.
 * SPDX-License-Identifier: Apache-2.0
 */
#pragma once

#include "gearsim/types.hpp"

namespace gearsim {

/*
 * Deterministic 64-bit generator (splitmix64). Same seed produces the same
 * stream on every platform; the update equations are part of the documented
 * interface (docs/determinism.md) so traces stay reproducible across builds.
 */
class Prng {
public:
    explicit Prng(u64 seed = 0) : state_(seed) {}

    u64 next_u64() {
        state_ += 0x9E3779B97F4A7C15ull;
        u64 z = state_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    /// Uniform in [0, n) via 128-bit multiply-shift. n must be > 0.
    u64 next_below(u64 n) {
        return static_cast<u64>((static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    /// Uniform in [lo, hi] inclusive.
    u64 next_range(u64 lo, u64 hi) { return lo + next_below(hi - lo + 1); }

    /// Uniform in [0, 1) with 53 significant bits.
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    u64 state() const { return state_; }

private:
    u64 state_;
};

} // namespace gearsim
