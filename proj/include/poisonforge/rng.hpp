#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace poisonforge {

// Splittable counter-free PRNG (xoshiro256++ seeded through splitmix64).
// All distributions are implemented in-house so that streams are bit-stable
// across platforms and standard-library versions. Splitting consumes one
// draw from the parent and yields an independently seeded child stream.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed) {
        std::uint64_t x = seed;
        for (auto& si : s_) si = splitmix64(x);
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // [0, 1) with 53-bit resolution
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // uniform over {0, 1, ..., n-1}; n must be positive
    int uniform_int(int n) {
        const auto wide = static_cast<unsigned __int128>(next_u64()) *
                          static_cast<unsigned __int128>(static_cast<std::uint64_t>(n));
        return static_cast<int>(static_cast<std::uint64_t>(wide >> 64));
    }

    bool bernoulli(double p) { return uniform() < p; }

    // Box-Muller; computes both values, keeps one (stream stays position-stable)
    double normal() {
        const double u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log1p(-u1));
        return r * std::cos(2.0 * std::numbers::pi * u2);
    }

    RngStream split() { return RngStream(next_u64() ^ 0x9e3779b97f4a7c15ULL); }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }
    static std::uint64_t splitmix64(std::uint64_t& x) {
        x += 0x9e3779b97f4a7c15ULL;
        std::uint64_t z = x;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::uint64_t s_[4];
};

} // namespace poisonforge
