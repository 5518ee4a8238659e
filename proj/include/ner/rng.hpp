#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace ner::rng {

// Deterministic PRNG used everywhere a seed appears. The generator is
// splitmix64 (Steele, Lea, Flood 2014): state advances by the golden-gamma
// constant and the output is a 64-bit finalizer mix. Shuffles are Fisher-Yates
// with bitmask-rejection bounded draws, so permutations are unbiased and
// reproduce bit-exactly on any platform. Algorithm id: "splitmix64/fy-v1".
inline constexpr const char* kAlgorithmId = "splitmix64/fy-v1";

class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // Uniform draw in [0, bound) by masking to the next power of two and
    // rejecting out-of-range values. bound = 0 returns 0.
    std::uint64_t bounded(std::uint64_t bound) {
        if (bound <= 1) return 0;
        std::uint64_t mask = bound - 1;
        mask |= mask >> 1;
        mask |= mask >> 2;
        mask |= mask >> 4;
        mask |= mask >> 8;
        mask |= mask >> 16;
        mask |= mask >> 32;
        std::uint64_t v;
        do {
            v = next() & mask;
        } while (v >= bound);
        return v;
    }

    // Uniform in [0, 1).
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    // Standard normal via Box-Muller.
    double normal() {
        double u;
        do {
            u = uniform();
        } while (u == 0.0);
        const double r = std::sqrt(-2.0 * std::log(u));
        const double theta = 6.283185307179586 * uniform();
        return r * std::cos(theta);
    }

private:
    std::uint64_t state_;
};

// In-place Fisher-Yates, descending index order.
template <typename T>
void shuffle(std::vector<T>& v, SplitMix64& gen) {
    for (std::size_t i = v.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(gen.bounded(i));
        using std::swap;
        swap(v[i - 1], v[j]);
    }
}

// Identity permutation of n elements shuffled under `seed`.
inline std::vector<std::size_t> permutation(std::size_t n, std::uint64_t seed) {
    std::vector<std::size_t> p(n);
    for (std::size_t i = 0; i < n; ++i) p[i] = i;
    SplitMix64 gen(seed);
    shuffle(p, gen);
    return p;
}

// Derives an independent stream seed from a base seed and a purpose label,
// so distinct pipeline stages never share a stream.
inline std::uint64_t derive(std::uint64_t seed, std::string_view label) {
    std::uint64_t h = 0xcbf29ce484222325ull;  // FNV-1a over the label
    for (const char c : label) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ull;
    }
    SplitMix64 gen(seed ^ h);
    return gen.next();
}

}  // namespace ner::rng
