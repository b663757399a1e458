#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "bcjrsim/common.hpp"
#include "bcjrsim/rng.hpp"

namespace bcjrsim {

/// Exponentially decaying ISI tap profile, normalized to unit power.
struct IsiProfile {
    int memory = 1;                 // L, in symbols
    double decay_rate = 0.0;        // eta
    std::vector<double> taps;       // h[0..L-1], sum of squares == 1
    double tap_deviation = 0.0;     // sigma_h^2, variance of per-use tap noise
};

/// Markov-Middleton impulsive noise parameters.
struct MarkovMiddletonParams {
    int levels = 1;          // N
    double impulsive_index = 0.8;   // A
    double background_ratio = 0.01; // Gamma
    double total_power = 1.0;       // sigma^2
    double correlation = 0.0;       // r in [0,1]
};

struct ChannelConfig {
    IsiProfile isi;
    MarkovMiddletonParams noise;
    /// Symbol alphabet, ascending. Only BPSK {-1,+1} is exercised, but the
    /// trellis construction works for any zero-mean unit-power alphabet.
    std::vector<double> constellation{-1.0, 1.0};
};

struct GaussianEmission {
    double mean = 0.0;
    double variance = 1.0;
};

/// Finite-state model shared by detection and learning: a row-stochastic
/// transition matrix plus per-state Gaussian emissions. `state_symbol`
/// labels each state with the constellation index of the symbol that
/// drives transitions into it (the newest symbol of the ISI sub-state);
/// the symbol map is derived from it and from the transition support.
struct TrellisSpec {
    int num_states = 0;                     // Q
    Matrix transitions;                     // Q x Q
    std::vector<GaussianEmission> emissions;
    std::vector<double> initial_dist;
    std::vector<double> constellation;
    std::vector<int> state_symbol;          // per state, index into constellation

    /// Pairs (prev, next) with nonzero probability whose driving symbol is
    /// the given constellation index.
    std::vector<std::pair<int, int>> symbol_map(int symbol_index) const {
        std::vector<std::pair<int, int>> pairs;
        for (int i = 0; i < num_states; ++i)
            for (int j = 0; j < num_states; ++j)
                if (transitions(i, j) > 0.0 && state_symbol[j] == symbol_index)
                    pairs.emplace_back(i, j);
        return pairs;
    }
};

/// One transmission: bits, symbols, channel output and the hidden joint
/// state path (used for supervised labeling and diagnostics).
struct Frame {
    std::vector<int> info_bits;
    std::vector<int> coded_bits;
    std::vector<double> tx_symbols;   // guard included, length T + L - 1
    std::vector<double> rx;           // length T (full-ISI-state samples only)
    std::vector<int> state_path;      // length T, joint state indices
};

/// Taps h_l = e^{-eta(l-1)} normalized to unit power.
inline IsiProfile build_isi_profile(int memory, double decay_rate,
                                    double tap_deviation = 0.0) {
    if (memory < 1) throw InvalidParameter("ISI memory must be >= 1");
    if (!std::isfinite(decay_rate)) throw InvalidParameter("decay rate must be finite");
    if (!(tap_deviation >= 0.0)) throw InvalidParameter("tap deviation must be >= 0");

    IsiProfile profile;
    profile.memory = memory;
    profile.decay_rate = decay_rate;
    profile.tap_deviation = tap_deviation;
    profile.taps.resize(memory);
    double energy = 0.0;
    for (int l = 0; l < memory; ++l) {
        profile.taps[l] = std::exp(-decay_rate * l);
        energy += profile.taps[l] * profile.taps[l];
    }
    const double scale = 1.0 / std::sqrt(energy);
    for (double& h : profile.taps) h *= scale;
    return profile;
}

/// Truncated-Poisson level probabilities p_j and variances
/// sigma_j^2 = sigma^2 (j/A + Gamma) / (1 + Gamma).
///
/// N=1 is pure background noise: the single variance is the total power
/// sigma^2 directly, not the j=0 formula value (which only describes the
/// background share of a genuinely multi-level mixture).
inline std::pair<std::vector<double>, std::vector<double>>
middleton_levels(const MarkovMiddletonParams& params) {
    if (params.levels < 1) throw InvalidParameter("noise levels must be >= 1");
    if (!(params.impulsive_index > 0.0)) throw InvalidParameter("impulsive index must be > 0");
    if (!(params.background_ratio > 0.0)) throw InvalidParameter("background ratio must be > 0");
    if (!(params.total_power > 0.0)) throw InvalidParameter("total power must be > 0");

    const int n = params.levels;
    if (n == 1) return {{1.0}, {params.total_power}};

    std::vector<double> probs(n), vars(n);
    double term = 1.0;  // A^j / j!, scaled by the common e^{-A} that cancels
    double sum = 0.0;
    for (int j = 0; j < n; ++j) {
        if (j > 0) term *= params.impulsive_index / j;
        probs[j] = term;
        sum += term;
        vars[j] = params.total_power *
                  (j / params.impulsive_index + params.background_ratio) /
                  (1.0 + params.background_ratio);
    }
    for (double& p : probs) p /= sum;
    return {probs, vars};
}

/// Noise-level transition matrix: r + (1-r) p_j on the diagonal,
/// (1-r) p_j off it. Stationary law is p_j for any r in [0,1).
inline Matrix noise_transition_matrix(const MarkovMiddletonParams& params) {
    if (params.correlation < 0.0 || params.correlation > 1.0)
        throw InvalidParameter("noise correlation must be in [0,1]");
    const auto [probs, vars] = middleton_levels(params);
    const int n = params.levels;
    const double r = params.correlation;
    Matrix m(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            m(i, j) = (i == j ? r : 0.0) + (1.0 - r) * probs[j];
    return m;
}

namespace detail {

/// ISI sub-state index: digits base |X|, newest symbol in the lowest digit.
/// State (x_t, x_{t-1}, ..., x_{t-L+1}) -> sum_k digit_k * |X|^k.
inline int isi_successor(int state, int new_digit, int alphabet, int num_isi_states) {
    return new_digit + alphabet * (state % (num_isi_states / alphabet));
}

inline double isi_state_mean(int state, const std::vector<double>& taps,
                             const std::vector<double>& constellation) {
    const int alphabet = static_cast<int>(constellation.size());
    double mean = 0.0;
    int rest = state;
    for (double tap : taps) {
        mean += tap * constellation[rest % alphabet];
        rest /= alphabet;
    }
    return mean;
}

}  // namespace detail

/// Joint ISI x noise trellis with Q = N |X|^L states. Joint index is
/// isi_index * N + noise_index; the transition matrix is the Kronecker
/// product of the symbol-driven ISI structure and the noise chain.
inline TrellisSpec build_joint_trellis(const ChannelConfig& config) {
    const int alphabet = static_cast<int>(config.constellation.size());
    if (alphabet < 2) throw InvalidParameter("constellation needs at least 2 symbols");
    const int memory = config.isi.memory;
    const int levels = config.noise.levels;
    int isi_states = 1;
    for (int l = 0; l < memory; ++l) isi_states *= alphabet;
    const int q = isi_states * levels;

    const auto [level_probs, level_vars] = middleton_levels(config.noise);
    const Matrix noise_tr = noise_transition_matrix(config.noise);
    const double symbol_prob = 1.0 / alphabet;

    TrellisSpec trellis;
    trellis.num_states = q;
    trellis.constellation = config.constellation;
    trellis.transitions = Matrix(q, q);
    trellis.emissions.resize(q);
    trellis.initial_dist.resize(q);
    trellis.state_symbol.resize(q);

    for (int isi = 0; isi < isi_states; ++isi) {
        const double mean = detail::isi_state_mean(isi, config.isi.taps, config.constellation);
        for (int lvl = 0; lvl < levels; ++lvl) {
            const int s = isi * levels + lvl;
            trellis.emissions[s] = {mean, level_vars[lvl]};
            trellis.initial_dist[s] = level_probs[lvl] / isi_states;
            trellis.state_symbol[s] = isi % alphabet;
            for (int digit = 0; digit < alphabet; ++digit) {
                const int isi_next = detail::isi_successor(isi, digit, alphabet, isi_states);
                for (int lvl_next = 0; lvl_next < levels; ++lvl_next)
                    trellis.transitions(s, isi_next * levels + lvl_next) =
                        symbol_prob * noise_tr(lvl, lvl_next);
            }
        }
    }
    return trellis;
}

/// Trellis a detector would build with assumed (possibly wrong) memory and
/// level count: taps are re-derived for assumed_L from the same decay rate,
/// and assumed_N = 1 collapses the noise model to a single state carrying
/// the total power sigma^2.
inline TrellisSpec build_reduced_trellis(const ChannelConfig& config, int assumed_memory,
                                         int assumed_levels) {
    if (assumed_memory < 1 || assumed_levels < 1)
        throw InvalidParameter("assumed trellis dimensions must be >= 1");
    ChannelConfig assumed = config;
    assumed.isi = build_isi_profile(assumed_memory, config.isi.decay_rate,
                                    config.isi.tap_deviation);
    assumed.noise.levels = assumed_levels;
    return build_joint_trellis(assumed);
}

/// Pass tx through the ISI + Markov-Middleton channel. The first L-1
/// symbols are the guard band: output starts at the first full ISI state,
/// so rx and state_path have length tx.size() - (L-1).
inline std::pair<std::vector<double>, std::vector<int>>
simulate_frame(const ChannelConfig& config, const std::vector<double>& tx_symbols,
               std::uint64_t rng_seed) {
    const int memory = config.isi.memory;
    const int alphabet = static_cast<int>(config.constellation.size());
    if (static_cast<int>(tx_symbols.size()) < memory)
        throw InvalidInput("frame shorter than the ISI memory");

    std::vector<int> tx_digits(tx_symbols.size());
    for (std::size_t t = 0; t < tx_symbols.size(); ++t) {
        auto it = std::find(config.constellation.begin(), config.constellation.end(),
                            tx_symbols[t]);
        if (it == config.constellation.end())
            throw InvalidInput("tx symbol not in the constellation");
        tx_digits[t] = static_cast<int>(it - config.constellation.begin());
    }

    const auto [level_probs, level_vars] = middleton_levels(config.noise);
    const Matrix noise_tr = noise_transition_matrix(config.noise);
    const int levels = config.noise.levels;
    int isi_states = 1;
    for (int l = 0; l < memory; ++l) isi_states *= alphabet;

    const std::size_t out_len = tx_symbols.size() - (memory - 1);
    std::vector<double> rx(out_len);
    std::vector<int> state_path(out_len);
    Rng rng(rng_seed);

    int level = static_cast<int>(rng.next_categorical(level_probs.data(), levels));
    for (std::size_t k = 0; k < out_len; ++k) {
        if (k > 0) level = static_cast<int>(rng.next_categorical(noise_tr.row(level), levels));
        const std::size_t t = k + memory - 1;
        double y = 0.0;
        int isi_index = 0;
        int weight = 1;
        for (int l = 0; l < memory; ++l) {
            double tap = config.isi.taps[l];
            if (config.isi.tap_deviation > 0.0)
                tap += rng.next_normal(0.0, std::sqrt(config.isi.tap_deviation));
            y += tap * tx_symbols[t - l];
            isi_index += tx_digits[t - l] * weight;
            weight *= alphabet;
        }
        y += rng.next_normal(0.0, std::sqrt(level_vars[level]));
        rx[k] = y;
        state_path[k] = isi_index * levels + level;
    }
    return {rx, state_path};
}

}  // namespace bcjrsim
