#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "bcjrsim/channel.hpp"
#include "bcjrsim/common.hpp"

namespace bcjrsim {

struct TrellisEdge {
    int from;
    int to;
    double prob;
};

/// State posteriors from forward-backward, plus (optionally) the pairwise
/// posteriors p(s_{t-1}, s_t | y) stored sparsely over the transition
/// support: pair_post(t, e) corresponds to edges[e] and row 0 is unused.
struct PosteriorGrid {
    Matrix state_post;              // T x Q
    double loglik = 0.0;            // log p(y_1..y_T)
    bool has_pairs = false;
    std::vector<TrellisEdge> edges;
    Matrix pair_post;               // T x edges.size()
};

/// Per-symbol posteriors over the constellation; llr is the binary
/// log p(x=+1|y) / p(x=-1|y) soft output.
struct SoftSymbolOutput {
    Matrix post;                    // T x |X|
    std::vector<double> llr;        // empty unless |X| == 2
    std::vector<double> constellation;
};

inline std::vector<TrellisEdge> transition_edges(const TrellisSpec& trellis) {
    std::vector<TrellisEdge> edges;
    for (int i = 0; i < trellis.num_states; ++i)
        for (int j = 0; j < trellis.num_states; ++j)
            if (trellis.transitions(i, j) > 0.0)
                edges.push_back({i, j, trellis.transitions(i, j)});
    return edges;
}

namespace detail {

/// Scaled-probability forward-backward over an arbitrary per-step
/// likelihood source. Probabilities are renormalized at every step and the
/// log scale factors accumulate to the exact sequence log-likelihood.
template <typename LikelihoodRow>
PosteriorGrid forward_backward_impl(const TrellisSpec& trellis, std::size_t len,
                                    LikelihoodRow&& lik_row, bool with_pairs) {
    const int q = trellis.num_states;
    if (len == 0) throw InvalidInput("empty observation sequence");

    const auto edges = transition_edges(trellis);
    PosteriorGrid grid;
    grid.state_post = Matrix(len, q);
    Matrix alpha(len, q);
    std::vector<double> scale(len);

    std::vector<double> lik(q);
    auto load_lik = [&](std::size_t t) {
        lik_row(t, lik.data());
        for (int s = 0; s < q; ++s)
            if (!std::isfinite(lik[s]) || lik[s] < 0.0)
                throw InvalidInput("likelihood must be finite and nonnegative");
    };

    load_lik(0);
    double c = 0.0;
    for (int s = 0; s < q; ++s) {
        alpha(0, s) = trellis.initial_dist[s] * lik[s];
        c += alpha(0, s);
    }
    if (c <= 0.0) throw DegenerateLikelihood(0);
    for (int s = 0; s < q; ++s) alpha(0, s) /= c;
    scale[0] = c;

    for (std::size_t t = 1; t < len; ++t) {
        load_lik(t);
        double* row = alpha.row(t);
        const double* prev = alpha.row(t - 1);
        for (const auto& e : edges) row[e.to] += prev[e.from] * e.prob;
        c = 0.0;
        for (int s = 0; s < q; ++s) {
            row[s] *= lik[s];
            c += row[s];
        }
        if (c <= 0.0) throw DegenerateLikelihood(t);
        for (int s = 0; s < q; ++s) row[s] /= c;
        scale[t] = c;
    }

    grid.loglik = 0.0;
    for (std::size_t t = 0; t < len; ++t) grid.loglik += std::log(scale[t]);

    if (with_pairs) {
        grid.has_pairs = true;
        grid.edges = edges;
        grid.pair_post = Matrix(len, edges.size());
    }

    // Backward pass, scaled by the forward factors so alpha*beta is already
    // normalized; beta rows are consumed immediately.
    std::vector<double> beta(q, 1.0), beta_next(q);
    for (int s = 0; s < q; ++s) grid.state_post(len - 1, s) = alpha(len - 1, s);
    for (std::size_t t = len - 1; t-- > 0;) {
        load_lik(t + 1);
        std::swap(beta, beta_next);
        std::fill(beta.begin(), beta.end(), 0.0);
        for (const auto& e : edges)
            beta[e.from] += e.prob * lik[e.to] * beta_next[e.to];
        const double inv_c = 1.0 / scale[t + 1];
        for (int s = 0; s < q; ++s) beta[s] *= inv_c;

        if (with_pairs) {
            double* pp = grid.pair_post.row(t + 1);
            const double* a = alpha.row(t);
            for (std::size_t e = 0; e < edges.size(); ++e)
                pp[e] = a[edges[e].from] * edges[e].prob * lik[edges[e].to] *
                        beta_next[edges[e].to] * inv_c;
        }

        double norm = 0.0;
        for (int s = 0; s < q; ++s) {
            grid.state_post(t, s) = alpha(t, s) * beta[s];
            norm += grid.state_post(t, s);
        }
        for (int s = 0; s < q; ++s) grid.state_post(t, s) /= norm;
    }
    return grid;
}

}  // namespace detail

/// BCJR inference with branch metric p(s_t|s_{t-1}) N(y_t; mu_s, sigma_s^2).
inline PosteriorGrid forward_backward(const TrellisSpec& trellis,
                                      const std::vector<double>& rx,
                                      bool with_pairs = false) {
    for (double y : rx)
        if (!std::isfinite(y)) throw InvalidInput("rx contains non-finite values");
    return detail::forward_backward_impl(
        trellis, rx.size(),
        [&](std::size_t t, double* out) {
            for (int s = 0; s < trellis.num_states; ++s)
                out[s] = gaussian_pdf(rx[t], trellis.emissions[s].mean,
                                      trellis.emissions[s].variance);
        },
        with_pairs);
}

/// Same recursion with caller-supplied likelihoods (T x Q), e.g. from the
/// NN estimator. Rows may be unnormalized; only ratios matter.
inline PosteriorGrid forward_backward_lik(const TrellisSpec& trellis,
                                           const Matrix& likelihoods,
                                      bool with_pairs = false) {
    if (static_cast<int>(likelihoods.cols()) != trellis.num_states)
        throw InvalidParameter("likelihood matrix width != state count");
    return detail::forward_backward_impl(
        trellis, likelihoods.rows(),
        [&](std::size_t t, double* out) {
            const double* row = likelihoods.row(t);
            std::copy(row, row + trellis.num_states, out);
        },
        with_pairs);
}

/// Marginalize pair posteriors over the symbol-driven transition subsets.
/// The first symbol has no incoming transition; its posterior comes from
/// the state marginal (the newest symbol is part of the state).
inline SoftSymbolOutput symbol_posteriors(const PosteriorGrid& grid,
                                          const TrellisSpec& trellis) {
    if (!grid.has_pairs)
        throw ContractViolation("symbol_posteriors requires pair posteriors");
    const std::size_t len = grid.state_post.rows();
    const int num_symbols = static_cast<int>(trellis.constellation.size());

    SoftSymbolOutput soft;
    soft.constellation = trellis.constellation;
    soft.post = Matrix(len, num_symbols);

    for (int s = 0; s < trellis.num_states; ++s)
        soft.post(0, trellis.state_symbol[s]) += grid.state_post(0, s);
    std::vector<int> edge_symbol(grid.edges.size());
    for (std::size_t e = 0; e < grid.edges.size(); ++e)
        edge_symbol[e] = trellis.state_symbol[grid.edges[e].to];
    for (std::size_t t = 1; t < len; ++t) {
        const double* pp = grid.pair_post.row(t);
        double* out = soft.post.row(t);
        for (std::size_t e = 0; e < grid.edges.size(); ++e) out[edge_symbol[e]] += pp[e];
    }

    for (std::size_t t = 0; t < len; ++t) {
        double* row = soft.post.row(t);
        double sum = 0.0;
        for (int x = 0; x < num_symbols; ++x) sum += row[x];
        for (int x = 0; x < num_symbols; ++x) row[x] /= sum;
    }

    if (num_symbols == 2) {
        soft.llr.resize(len);
        for (std::size_t t = 0; t < len; ++t) {
            const double p0 = std::max(soft.post(t, 0), 1e-300);
            const double p1 = std::max(soft.post(t, 1), 1e-300);
            soft.llr[t] = std::log(p1) - std::log(p0);
        }
    }
    return soft;
}

/// MAP symbol decisions; ties break toward the smallest symbol.
inline std::vector<double> map_detect(const SoftSymbolOutput& soft) {
    const std::size_t len = soft.post.rows();
    const int num_symbols = static_cast<int>(soft.post.cols());
    std::vector<double> decisions(len);
    for (std::size_t t = 0; t < len; ++t) {
        int best = 0;
        for (int x = 1; x < num_symbols; ++x)
            if (soft.post(t, x) > soft.post(t, best)) best = x;
        decisions[t] = soft.constellation[best];
    }
    return decisions;
}

/// Stationary distribution by power iteration from the uniform vector.
/// Reducible chains return the limit reached from that start.
inline std::vector<double> stationary_distribution(const Matrix& transitions) {
    if (transitions.rows() != transitions.cols() || transitions.rows() == 0)
        throw InvalidParameter("transition matrix must be square and nonempty");
    if (!rows_stochastic(transitions, 1e-8))
        throw InvalidParameter("transition matrix rows must sum to 1");

    const std::size_t q = transitions.rows();
    std::vector<double> pi(q, 1.0 / q), next(q);
    for (int iter = 0; iter < 1000000; ++iter) {
        std::fill(next.begin(), next.end(), 0.0);
        for (std::size_t i = 0; i < q; ++i) {
            const double* row = transitions.row(i);
            for (std::size_t j = 0; j < q; ++j) next[j] += pi[i] * row[j];
        }
        double sum = 0.0;
        for (double v : next) sum += v;
        for (double& v : next) v /= sum;
        double residual = 0.0;
        for (std::size_t j = 0; j < q; ++j) residual += std::abs(next[j] - pi[j]);
        pi.swap(next);
        if (residual < 1e-13) break;
    }
    return pi;
}

}  // namespace bcjrsim
