#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

#include "dot11p/types.hpp"

namespace dot11p {

// splitmix64 step; used both as a generator and to derive stream seeds.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ull;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

/// Derives an independent stream seed from a master seed and stream tags.
/// Distinct tag tuples give statistically independent xoshiro-quality seeds,
/// which keeps concurrent Monte-Carlo trials reproducible.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a = 0,
                                 std::uint64_t b = 0, std::uint64_t c = 0) {
    std::uint64_t s = master;
    splitmix64(s);
    s ^= 0x243f6a8885a308d3ull * (a + 1);
    splitmix64(s);
    s ^= 0x13198a2e03707344ull * (b + 1);
    splitmix64(s);
    s ^= 0xa4093822299f31d0ull * (c + 1);
    return splitmix64(s);
}

/// Small deterministic PRNG (splitmix64 core). All randomness in the library
/// flows through this type so runs are bit-identical for a given seed on any
/// platform.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() { return splitmix64(state_); }

    // uniform in [0, 1)
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // uniform in (0, 1]; safe as a log() argument
    double uniform_pos() { return 1.0 - uniform(); }

    std::uint32_t below(std::uint32_t n) {
        return static_cast<std::uint32_t>(next_u64() % n);
    }

    bool bit() { return (next_u64() >> 63) != 0; }

    // standard normal via Box-Muller
    double gauss() {
        double r = std::sqrt(-2.0 * std::log(uniform_pos()));
        return r * std::cos(2.0 * std::numbers::pi * uniform());
    }

    // circular complex Gaussian with E|z|^2 = 1
    cplx cgauss() {
        double r = std::sqrt(-std::log(uniform_pos()));
        double phi = 2.0 * std::numbers::pi * uniform();
        return {r * std::cos(phi), r * std::sin(phi)};
    }

private:
    std::uint64_t state_;
};

inline bitvec random_bits(std::size_t n, Rng& rng) {
    bitvec out(n);
    for (auto& b : out) b = rng.bit() ? 1 : 0;
    return out;
}

}  // namespace dot11p
