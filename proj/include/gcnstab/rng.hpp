#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <stdexcept>
#include <vector>

namespace gcnstab {

// splitmix64 finalizer, used only for seed derivation.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Derives a stream seed from a base seed, a stream tag, and up to three loop
// indices. Every randomized stage (graph generation, features, perturbations,
// evaluation) draws from its own derived stream so that runs are reproducible
// and trials are independent of execution order.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream,
                                 std::uint64_t a = 0, std::uint64_t b = 0,
                                 std::uint64_t c = 0) {
    std::uint64_t h = splitmix64(base ^ 0x6a09e667f3bcc909ULL);
    h = splitmix64(h ^ stream);
    h = splitmix64(h ^ a);
    h = splitmix64(h ^ b);
    h = splitmix64(h ^ c);
    return h;
}

// Stream tags for derive_seed; one per independent random stage, registered
// centrally so two stages can never collide on a derived seed.
namespace streams {
inline constexpr std::uint64_t kGraph = 1;
inline constexpr std::uint64_t kFeatures = 2;
inline constexpr std::uint64_t kPerturbation = 3;
inline constexpr std::uint64_t kEvalPerturbation = 4;
inline constexpr std::uint64_t kDataset = 5;
inline constexpr std::uint64_t kTail = 6;
inline constexpr std::uint64_t kTrainFeatures = 7;
}  // namespace streams

// Identifies the generator and the distribution constructions; recorded in
// run manifests so results can be regenerated exactly.
inline constexpr const char* kRngAlgorithmId =
    "mt19937_64 + splitmix64 seed derivation; uniform = top 53 bits, "
    "integers by bitmask rejection, normals by Box-Muller (cosine branch)";

// Seeded random source. The engine is std::mt19937_64, whose output sequence
// is fixed by the C++ standard. All distributions are built directly on the
// raw 64-bit stream (std:: distributions are implementation-defined), so
// identical seeds give identical draws on every platform.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    // Uniform on [0, 1), 53-bit resolution.
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    // Uniform on (0, 1]; safe as a log() argument.
    double uniform_pos() {
        return (static_cast<double>(next() >> 11) + 1.0) * 0x1.0p-53;
    }

    bool bernoulli(double p) { return uniform() < p; }

    // Uniform integer in [0, bound) by bitmask rejection; unbiased.
    std::uint64_t below(std::uint64_t bound) {
        if (bound == 0)
            throw std::invalid_argument("Rng::below: bound must be positive");
        const std::uint64_t mask = std::bit_ceil(bound) - 1;
        for (;;) {
            const std::uint64_t v = next() & mask;
            if (v < bound) return v;
        }
    }

    // Standard normal via Box-Muller, cosine branch. Exactly two raw draws
    // per call and no cached state, so call counts stay deterministic.
    double normal() {
        const double u1 = uniform_pos();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) *
               std::cos(2.0 * std::numbers::pi * u2);
    }

    // k distinct indices from [0, pool) by partial Fisher-Yates.
    std::vector<std::size_t> sample_without_replacement(std::size_t pool,
                                                        std::size_t k) {
        if (k > pool)
            throw std::invalid_argument(
                "sample_without_replacement: k exceeds pool size");
        std::vector<std::size_t> idx(pool);
        for (std::size_t i = 0; i < pool; ++i) idx[i] = i;
        for (std::size_t i = 0; i < k; ++i) {
            const std::size_t j = i + below(pool - i);
            std::swap(idx[i], idx[j]);
        }
        idx.resize(k);
        return idx;
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace gcnstab
