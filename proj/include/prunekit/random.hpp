// Copyright (c) 2026, prunekit authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>

namespace prunekit {

/// Portable uniform draw; the standard distributions are not specified
/// bit-for-bit across library implementations.
inline double uniform01(std::mt19937_64& rng) { return double(rng() >> 11) * 0x1.0p-53; }

inline float uniform(std::mt19937_64& rng, float lo, float hi) { return lo + float(uniform01(rng)) * (hi - lo); }

inline int uniform_int(std::mt19937_64& rng, int lo, int hi) {  // inclusive
    return lo + int(rng() % std::uint64_t(hi - lo + 1));
}

}  // namespace prunekit
