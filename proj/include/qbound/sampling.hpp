#pragma once

#include <cstdint>

#include "qbound/matcore.hpp"

namespace qbound {

/// Deterministic seed for stream `stream` of a run seeded with `seed` (SplitMix64 finaliser).
std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream);

inline constexpr long kTailBlock = 1L << 14;

struct TailCount {
    long hits = 0;
    long samples = 0;
};

/// Counts x = R z (z standard normal) with x^T W x >= c. Block b uses stream_seed(seed, b).
TailCount tail_count_serial(const RMat& root, const RMat& w, double c, long samples, std::uint64_t seed);
/// Same blocks and streams as the serial kernel, distributed over OpenMP threads.
TailCount tail_count_parallel(const RMat& root, const RMat& w, double c, long samples, std::uint64_t seed);

}  // namespace qbound
