#pragma once

// Test-only oracles, kept independent of the library's inference path:
// exhaustive path enumeration over the joint HMM factorization, and a
// plain log-domain backward recursion.

#include <cmath>
#include <vector>

#include "bcjrsim/channel.hpp"
#include "bcjrsim/common.hpp"
#include "bcjrsim/rng.hpp"
#include "bcjrsim/trellis.hpp"

namespace oracle {

struct Enumeration {
    bcjrsim::Matrix state_post;   // T x Q
    std::vector<bcjrsim::Matrix> pair_post;  // per t: Q x Q, entry (i,j) at t>=1
    bcjrsim::Matrix symbol_post;  // T x |X|
    double loglik = 0.0;
};

/// Sum p(s_1..s_T, y_1..y_T) over every one of the Q^T state paths.
inline Enumeration enumerate_paths(const bcjrsim::TrellisSpec& trellis,
                                   const std::vector<double>& rx) {
    const int q = trellis.num_states;
    const std::size_t len = rx.size();
    const int num_symbols = static_cast<int>(trellis.constellation.size());

    Enumeration out;
    out.state_post = bcjrsim::Matrix(len, q);
    out.symbol_post = bcjrsim::Matrix(len, num_symbols);
    out.pair_post.assign(len, bcjrsim::Matrix(q, q));

    std::vector<int> path(len, 0);
    double total = 0.0;
    for (;;) {
        double prob = trellis.initial_dist[path[0]] *
                      bcjrsim::gaussian_pdf(rx[0], trellis.emissions[path[0]].mean,
                                            trellis.emissions[path[0]].variance);
        for (std::size_t t = 1; t < len && prob > 0.0; ++t)
            prob *= trellis.transitions(path[t - 1], path[t]) *
                    bcjrsim::gaussian_pdf(rx[t], trellis.emissions[path[t]].mean,
                                          trellis.emissions[path[t]].variance);
        if (prob > 0.0) {
            total += prob;
            for (std::size_t t = 0; t < len; ++t) {
                out.state_post(t, path[t]) += prob;
                out.symbol_post(t, trellis.state_symbol[path[t]]) += prob;
                if (t >= 1) out.pair_post[t](path[t - 1], path[t]) += prob;
            }
        }
        std::size_t digit = 0;
        while (digit < len && ++path[digit] == q) path[digit++] = 0;
        if (digit == len) break;
    }

    for (std::size_t t = 0; t < len; ++t) {
        for (int s = 0; s < q; ++s) out.state_post(t, s) /= total;
        for (int x = 0; x < num_symbols; ++x) out.symbol_post(t, x) /= total;
        for (int i = 0; i < q; ++i)
            for (int j = 0; j < q; ++j) out.pair_post[t](i, j) /= total;
    }
    out.loglik = std::log(total);
    return out;
}

/// log p(y) evaluated from the backward side: sum_s p(s) p(y_1|s) beta_1(s).
/// Log-domain without scaling; fine for the short sequences tests use.
inline double backward_loglik(const bcjrsim::TrellisSpec& trellis,
                              const std::vector<double>& rx) {
    const int q = trellis.num_states;
    const std::size_t len = rx.size();
    std::vector<double> beta(q, 1.0), next(q);
    for (std::size_t t = len - 1; t-- > 0;) {
        for (int i = 0; i < q; ++i) {
            double acc = 0.0;
            for (int j = 0; j < q; ++j)
                acc += trellis.transitions(i, j) *
                       bcjrsim::gaussian_pdf(rx[t + 1], trellis.emissions[j].mean,
                                             trellis.emissions[j].variance) *
                       beta[j];
            next[i] = acc;
        }
        beta = next;
    }
    double total = 0.0;
    for (int s = 0; s < q; ++s)
        total += trellis.initial_dist[s] *
                 bcjrsim::gaussian_pdf(rx[0], trellis.emissions[s].mean,
                                       trellis.emissions[s].variance) *
                 beta[s];
    return std::log(total);
}

/// Random trellis over BPSK labels with optional sparse transition support.
inline bcjrsim::TrellisSpec random_trellis(int q, bcjrsim::Rng& rng, bool sparse) {
    bcjrsim::TrellisSpec trellis;
    trellis.num_states = q;
    trellis.constellation = {-1.0, 1.0};
    trellis.transitions = bcjrsim::Matrix(q, q);
    trellis.emissions.resize(q);
    trellis.initial_dist.resize(q);
    trellis.state_symbol.resize(q);

    double init_sum = 0.0;
    for (int s = 0; s < q; ++s) {
        trellis.emissions[s] = {rng.next_uniform(-2.0, 2.0), rng.next_uniform(0.1, 2.0)};
        trellis.initial_dist[s] = 0.05 + rng.next_unit();
        init_sum += trellis.initial_dist[s];
        trellis.state_symbol[s] = s < (q + 1) / 2 ? 0 : 1;
    }
    for (double& p : trellis.initial_dist) p /= init_sum;

    for (int i = 0; i < q; ++i) {
        double row_sum = 0.0;
        while (row_sum == 0.0) {
            for (int j = 0; j < q; ++j) {
                const bool keep = !sparse || rng.next_unit() > 0.35;
                trellis.transitions(i, j) = keep ? 0.05 + rng.next_unit() : 0.0;
                row_sum += trellis.transitions(i, j);
            }
        }
        for (int j = 0; j < q; ++j) trellis.transitions(i, j) /= row_sum;
    }
    return trellis;
}

inline std::vector<double> random_observations(std::size_t len, bcjrsim::Rng& rng) {
    std::vector<double> rx(len);
    for (auto& y : rx) y = rng.next_uniform(-3.0, 3.0);
    return rx;
}

}  // namespace oracle
