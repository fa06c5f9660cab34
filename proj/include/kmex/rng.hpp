#pragma once

#include "kmex/core.hpp"

#include <cmath>
#include <cstdint>
#include <numbers>

namespace kmex {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

/// Derive a child seed from a base seed, a stream name, and an index.
/// This is the toolkit-wide seed-splitting rule: every consumer of
/// randomness (per-class clustering, per-restart init, per-image noise)
/// gets its own stream so that evaluation order can never reorder draws.
inline std::uint64_t split_seed(std::uint64_t base, std::string_view stream,
                                std::uint64_t index = 0) {
    std::uint64_t s = base ^ fnv1a64(stream);
    std::uint64_t a = splitmix64(s);
    s = a ^ (index * 0x9e3779b97f4a7c15ull);
    return splitmix64(s);
}

/// xoshiro256++ with splitmix64 seeding. Self-contained so that streams
/// are identical on every platform and standard library.
class Rng {
public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t sm = seed;
        for (auto& word : state_) word = splitmix64(sm);
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    /// Uniform in [0, 1), 53-bit resolution.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, n), unbiased.
    std::int64_t uniform_int(std::int64_t n) {
        require(n > 0, "rng: uniform_int bound must be positive, got ", n);
        const std::uint64_t un = static_cast<std::uint64_t>(n);
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % un;
        std::uint64_t r = next_u64();
        while (r >= limit) r = next_u64();
        return static_cast<std::int64_t>(r % un);
    }

    /// Standard normal via Box-Muller (no cached spare, so the stream
    /// position is a pure function of the call count).
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    template <class It>
    void shuffle(It first, It last) {
        const auto n = static_cast<std::int64_t>(last - first);
        for (std::int64_t i = n - 1; i > 0; --i) {
            std::swap(first[i], first[uniform_int(i + 1)]);
        }
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }

    std::uint64_t state_[4]{};
};

}  // namespace kmex
