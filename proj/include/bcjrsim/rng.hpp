#pragma once

#include <cmath>
#include <cstdint>

namespace bcjrsim {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Derive an independent stream seed from a master seed and up to three
/// tags (sweep point, trial, purpose). Used so Monte Carlo tasks get
/// reproducible seeds regardless of scheduling order.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a = 0,
                                 std::uint64_t b = 0, std::uint64_t c = 0) {
    std::uint64_t s = master ^ 0x6a09e667f3bcc909ULL;
    splitmix64(s);
    s ^= a * 0xff51afd7ed558ccdULL + 1;
    splitmix64(s);
    s ^= b * 0xc4ceb9fe1a85ec53ULL + 2;
    splitmix64(s);
    s ^= c * 0x2545f4914f6cdd1dULL + 3;
    return splitmix64(s);
}

/// xoshiro256++ with a fixed, platform-independent normal sampler.
/// std::normal_distribution is implementation-defined, which would break
/// the bit-identical-output reproducibility contract across toolchains.
class Rng {
public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t sm = seed;
        for (auto& word : s_) word = splitmix64(sm);
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

    /// Uniform double in (0, 1]: never 0, safe inside log().
    double next_unit() {
        return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
    }

    /// Uniform double in [lo, hi).
    double next_uniform(double lo, double hi) {
        return lo + (hi - lo) * (static_cast<double>(next_u64() >> 11) * 0x1.0p-53);
    }

    /// Uniform integer in [0, n).
    std::uint64_t next_below(std::uint64_t n) {
        // Modulo bias is < 2^-53 for the n used here (batch indices, permutations).
        return next_u64() % n;
    }

    /// Standard normal via Box-Muller; the second deviate is discarded so
    /// every draw consumes exactly two uniforms.
    double next_normal() {
        const double u1 = next_unit();
        const double u2 = next_unit();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    double next_normal(double mean, double stddev) {
        return mean + stddev * next_normal();
    }

    /// Sample an index from a discrete distribution given cumulative weights.
    std::size_t next_categorical(const double* probs, std::size_t n) {
        const double u = next_unit();
        double acc = 0.0;
        for (std::size_t i = 0; i + 1 < n; ++i) {
            acc += probs[i];
            if (u <= acc) return i;
        }
        return n - 1;
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }
    std::uint64_t s_[4];
};

}  // namespace bcjrsim
