#include "qbound/sampling.hpp"

#include <random>

namespace qbound {

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

namespace {

long count_block(const RMat& root, const RMat& w, double c, long block, long samples, std::uint64_t seed) {
    const long begin = block * kTailBlock;
    const long n = std::min(kTailBlock, samples - begin);
    std::mt19937_64 rng(stream_seed(seed, static_cast<std::uint64_t>(block)));
    std::normal_distribution<double> gauss;
    const auto k = root.cols();
    RVec z(k);
    long hits = 0;
    for (long i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < k; ++j) z(j) = gauss(rng);
        const RVec x = root * z;
        if (x.dot(w * x) >= c) ++hits;
    }
    return hits;
}

long block_count(long samples) { return (samples + kTailBlock - 1) / kTailBlock; }

}  // namespace

TailCount tail_count_serial(const RMat& root, const RMat& w, double c, long samples, std::uint64_t seed) {
    TailCount out{0, samples};
    for (long b = 0; b < block_count(samples); ++b) out.hits += count_block(root, w, c, b, samples, seed);
    return out;
}

TailCount tail_count_parallel(const RMat& root, const RMat& w, double c, long samples, std::uint64_t seed) {
    long hits = 0;
    const long blocks = block_count(samples);
#pragma omp parallel for schedule(static) reduction(+ : hits)
    for (long b = 0; b < blocks; ++b) hits += count_block(root, w, c, b, samples, seed);
    return {hits, samples};
}

}  // namespace qbound
