#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

#include "bcjrsim/common.hpp"
#include "bcjrsim/rng.hpp"

namespace bcjrsim {

/// Rate-1/2 feed-forward convolutional code with the (171,133) octal
/// generators (constraint length 7, 64 decoder states), zero-tail
/// terminated. The paper calls this "memory depth of 7 bits"; the code's
/// shift register holds 6 bits.
struct ConvCodeSpec {
    static constexpr unsigned kGenerator1 = 0171;  // 1111001
    static constexpr unsigned kGenerator2 = 0133;  // 1011011
    static constexpr int kConstraint = 7;
    static constexpr int kMemory = kConstraint - 1;
    static constexpr int kStates = 1 << kMemory;
};

namespace detail {

inline int parity(unsigned word) { return __builtin_popcount(word) & 1; }

/// Coded bit pair for input bit `bit` entering register state `state`.
inline std::pair<int, int> conv_output(int state, int bit) {
    const unsigned word = (static_cast<unsigned>(bit) << ConvCodeSpec::kMemory) | state;
    return {parity(word & ConvCodeSpec::kGenerator1),
            parity(word & ConvCodeSpec::kGenerator2)};
}

inline int conv_next_state(int state, int bit) {
    return ((static_cast<unsigned>(bit) << ConvCodeSpec::kMemory) | state) >> 1;
}

}  // namespace detail

/// Encode and zero-terminate: output holds 2*(len + 6) bits, generator-1
/// bit first within each pair.
inline std::vector<int> conv_encode(const std::vector<int>& info_bits) {
    std::vector<int> coded;
    coded.reserve(2 * (info_bits.size() + ConvCodeSpec::kMemory));
    int state = 0;
    auto push = [&](int bit) {
        const auto [c1, c2] = detail::conv_output(state, bit);
        coded.push_back(c1);
        coded.push_back(c2);
        state = detail::conv_next_state(state, bit);
    };
    for (int bit : info_bits) push(bit & 1);
    for (int k = 0; k < ConvCodeSpec::kMemory; ++k) push(0);
    return coded;
}

/// Soft-input Viterbi over the 64-state code trellis. LLR convention:
/// positive favors coded bit 0. Returns the maximum-likelihood info bits
/// for the zero-terminated codeword (tail stripped).
inline std::vector<int> soft_decode(const std::vector<double>& llrs) {
    if (llrs.size() % 2 != 0) throw InvalidInput("LLR vector length must be even");
    const std::size_t steps = llrs.size() / 2;
    if (steps < ConvCodeSpec::kMemory) throw InvalidInput("frame shorter than the code tail");
    const std::size_t info_len = steps - ConvCodeSpec::kMemory;
    constexpr int kStates = ConvCodeSpec::kStates;
    constexpr double kNegInf = -std::numeric_limits<double>::infinity();

    std::vector<double> metric(kStates, kNegInf), next_metric(kStates);
    metric[0] = 0.0;
    // decisions[t] bit s: LSB of the winning predecessor of state s at step t.
    // The input bit itself is the destination state's MSB, so one bit per
    // state disambiguates the path.
    std::vector<std::uint64_t> decisions(steps, 0);

    for (std::size_t t = 0; t < steps; ++t) {
        const double l1 = llrs[2 * t];
        const double l2 = llrs[2 * t + 1];
        std::fill(next_metric.begin(), next_metric.end(), kNegInf);
        std::uint64_t decision = 0;
        const int max_bit = t < info_len ? 1 : 0;  // tail forces zeros
        for (int state = 0; state < kStates; ++state) {
            if (metric[state] == kNegInf) continue;
            for (int bit = 0; bit <= max_bit; ++bit) {
                const auto [c1, c2] = detail::conv_output(state, bit);
                const double branch = (c1 ? -l1 : l1) + (c2 ? -l2 : l2);
                const int next = detail::conv_next_state(state, bit);
                const double cand = metric[state] + branch;
                if (cand > next_metric[next]) {
                    next_metric[next] = cand;
                    if (state & 1)
                        decision |= std::uint64_t{1} << next;
                    else
                        decision &= ~(std::uint64_t{1} << next);
                }
            }
        }
        decisions[t] = decision;
        metric.swap(next_metric);
    }

    // Traceback from the zero state (termination guarantees it).
    std::vector<int> bits(steps);
    int state = 0;
    constexpr int kLowMask = (1 << (ConvCodeSpec::kMemory - 1)) - 1;
    for (std::size_t t = steps; t-- > 0;) {
        bits[t] = state >> (ConvCodeSpec::kMemory - 1);
        state = ((state & kLowMask) << 1) |
                static_cast<int>((decisions[t] >> state) & 1);
    }
    bits.resize(info_len);
    return bits;
}

/// Seeded uniform-random bijection over coded-bit indices. Interleaving
/// spreads the r=0.98 noise bursts across the codeword.
struct Interleaver {
    std::vector<std::size_t> permutation;

    static Interleaver random(std::size_t length, std::uint64_t seed) {
        Interleaver ilv;
        ilv.permutation.resize(length);
        std::iota(ilv.permutation.begin(), ilv.permutation.end(), std::size_t{0});
        Rng rng(seed);
        for (std::size_t i = length; i > 1; --i)
            std::swap(ilv.permutation[i - 1], ilv.permutation[rng.next_below(i)]);
        return ilv;
    }

    static Interleaver identity(std::size_t length) {
        Interleaver ilv;
        ilv.permutation.resize(length);
        std::iota(ilv.permutation.begin(), ilv.permutation.end(), std::size_t{0});
        return ilv;
    }
};

template <typename T>
std::vector<T> interleave(const std::vector<T>& input, const Interleaver& ilv) {
    if (input.size() != ilv.permutation.size())
        throw InvalidInput("interleaver length mismatch");
    std::vector<T> out(input.size());
    for (std::size_t i = 0; i < input.size(); ++i) out[i] = input[ilv.permutation[i]];
    return out;
}

template <typename T>
std::vector<T> deinterleave(const std::vector<T>& input, const Interleaver& ilv) {
    if (input.size() != ilv.permutation.size())
        throw InvalidInput("interleaver length mismatch");
    std::vector<T> out(input.size());
    for (std::size_t i = 0; i < input.size(); ++i) out[ilv.permutation[i]] = input[i];
    return out;
}

/// Minimum output weight over input sequences that leave the zero state
/// and remerge within `max_depth` steps — the free distance once the
/// search depth passes the remerge horizon (d_free = 10 for this code).
inline int free_distance_bound(int max_depth = 40) {
    constexpr int kStates = ConvCodeSpec::kStates;
    constexpr int kInf = std::numeric_limits<int>::max() / 2;
    std::vector<int> weight(kStates, kInf);
    int best = kInf;
    // Diverge from state 0 with a 1 bit.
    {
        const auto [c1, c2] = detail::conv_output(0, 1);
        weight[detail::conv_next_state(0, 1)] = c1 + c2;
    }
    for (int depth = 1; depth < max_depth; ++depth) {
        std::vector<int> next(kStates, kInf);
        for (int state = 0; state < kStates; ++state) {
            if (weight[state] >= kInf) continue;
            for (int bit = 0; bit <= 1; ++bit) {
                const auto [c1, c2] = detail::conv_output(state, bit);
                const int ns = detail::conv_next_state(state, bit);
                const int w = weight[state] + c1 + c2;
                if (ns == 0)
                    best = std::min(best, w);
                else
                    next[ns] = std::min(next[ns], w);
            }
        }
        weight.swap(next);
    }
    return best;
}

}  // namespace bcjrsim
