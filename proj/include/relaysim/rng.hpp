#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace relaysim {

// FNV-1a over a string; used both for sub-stream derivation and content hashes.
inline uint64_t fnv1a(std::string_view s, uint64_t h = 0xcbf29ce484222325ULL) {
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Stable 64-bit seed for the sub-stream `label` of a root seed.
inline uint64_t derive_seed(uint64_t root, std::string_view label) {
    uint64_t h = fnv1a(label);
    h ^= root + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    return h;
}

// Deterministic RNG with distribution helpers implemented in-house so output
// does not depend on the standard library's distribution internals.
class Rng {
public:
    Rng() : engine_(0) {}
    explicit Rng(uint64_t seed) : engine_(seed) {}

    // Derive the sub-stream `name` from a root seed. All randomness in a run
    // flows from one root seed through named streams (env, dispatch, ga,
    // exploration) so components are independently reproducible.
    static Rng stream(uint64_t root_seed, std::string_view name) {
        return Rng(derive_seed(root_seed, name));
    }

    uint64_t next_u64() { return engine_(); }

    // Uniform in [0, n) via 128-bit multiply (Lemire), bias-corrected.
    uint64_t below(uint64_t n) {
        uint64_t x = next_u64();
        __uint128_t m = static_cast<__uint128_t>(x) * n;
        auto lo = static_cast<uint64_t>(m);
        if (lo < n) {
            const uint64_t t = -n % n;
            while (lo < t) {
                x = next_u64();
                m = static_cast<__uint128_t>(x) * n;
                lo = static_cast<uint64_t>(m);
            }
        }
        return static_cast<uint64_t>(m >> 64);
    }

    int uniform_int(int lo, int hi) {  // inclusive bounds
        return lo + static_cast<int>(below(static_cast<uint64_t>(hi - lo + 1)));
    }

    double uniform() {  // [0, 1)
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    bool bernoulli(double p) { return uniform() < p; }

    // Standard normal via Box-Muller (deterministic, stateless pairing).
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace relaysim
