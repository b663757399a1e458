#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <future>
#include <limits>
#include <numeric>
#include <utility>
#include <vector>

#include "bcjrsim/channel.hpp"
#include "bcjrsim/common.hpp"
#include "bcjrsim/rng.hpp"
#include "bcjrsim/trellis.hpp"

namespace bcjrsim {

struct BaumWelchConfig {
    int num_states = 2;
    int max_iters = 1500;
    double loglik_tol = 1e-9;   // relative improvement threshold for early stop
    int tol_patience = 10;      // consecutive small improvements before stopping
    int num_restarts = 3;
    std::uint64_t seed = 0;
    double variance_floor = 1e-8;
};

/// Bijection from learned state indices to reference state indices.
struct StateAlignment {
    std::vector<int> permutation;  // permutation[learned] = reference
    double assignment_cost = 0.0;
};

namespace detail {

inline double emission_distance(const GaussianEmission& a, const GaussianEmission& b) {
    const double dm = a.mean - b.mean;
    const double dv = std::log(std::max(a.variance, kVarianceFloor)) -
                      std::log(std::max(b.variance, kVarianceFloor));
    return dm * dm + dv * dv;
}

struct EmStats {
    double loglik = 0.0;
    Matrix trans_acc;            // expected transition counts
    std::vector<double> occ;     // sum_t xi_t(j)
    std::vector<double> occ_y;   // sum_t xi_t(j) y_t
    std::vector<double> occ_yy;  // sum_t xi_t(j) y_t^2
    std::vector<double> first;   // xi_1(j)
};

/// One E-step: scaled forward-backward accumulating the transition and
/// occupancy statistics in place instead of materializing pair posteriors.
inline EmStats em_expectation(const TrellisSpec& model, const std::vector<double>& rx) {
    const int q = model.num_states;
    const std::size_t len = rx.size();
    const auto edges = transition_edges(model);

    Matrix lik(len, q);
    for (std::size_t t = 0; t < len; ++t)
        for (int s = 0; s < q; ++s)
            lik(t, s) = gaussian_pdf(rx[t], model.emissions[s].mean,
                                     model.emissions[s].variance);

    Matrix alpha(len, q);
    std::vector<double> scale(len);
    double c = 0.0;
    for (int s = 0; s < q; ++s) {
        alpha(0, s) = model.initial_dist[s] * lik(0, s);
        c += alpha(0, s);
    }
    if (c <= 0.0) throw DegenerateLikelihood(0);
    for (int s = 0; s < q; ++s) alpha(0, s) /= c;
    scale[0] = c;
    for (std::size_t t = 1; t < len; ++t) {
        double* row = alpha.row(t);
        const double* prev = alpha.row(t - 1);
        const double* lk = lik.row(t);
        for (const auto& e : edges) row[e.to] += prev[e.from] * e.prob;
        c = 0.0;
        for (int s = 0; s < q; ++s) {
            row[s] *= lk[s];
            c += row[s];
        }
        if (c <= 0.0) throw DegenerateLikelihood(t);
        for (int s = 0; s < q; ++s) row[s] /= c;
        scale[t] = c;
    }

    EmStats stats;
    stats.trans_acc = Matrix(q, q);
    stats.occ.assign(q, 0.0);
    stats.occ_y.assign(q, 0.0);
    stats.occ_yy.assign(q, 0.0);
    stats.first.assign(q, 0.0);
    for (std::size_t t = 0; t < len; ++t) stats.loglik += std::log(scale[t]);

    std::vector<double> beta(q, 1.0), beta_next(q), post(q);
    for (int s = 0; s < q; ++s) {
        const double g = alpha(len - 1, s);
        stats.occ[s] += g;
        stats.occ_y[s] += g * rx[len - 1];
        stats.occ_yy[s] += g * rx[len - 1] * rx[len - 1];
    }
    for (std::size_t t = len - 1; t-- > 0;) {
        std::swap(beta, beta_next);
        std::fill(beta.begin(), beta.end(), 0.0);
        const double* lk = lik.row(t + 1);
        const double* a = alpha.row(t);
        const double inv_c = 1.0 / scale[t + 1];
        for (const auto& e : edges) {
            const double branch = e.prob * lk[e.to] * beta_next[e.to];
            beta[e.from] += branch;
            stats.trans_acc(e.from, e.to) += a[e.from] * branch * inv_c;
        }
        for (int s = 0; s < q; ++s) beta[s] *= inv_c;
        double norm = 0.0;
        for (int s = 0; s < q; ++s) {
            post[s] = a[s] * beta[s];
            norm += post[s];
        }
        for (int s = 0; s < q; ++s) {
            const double g = post[s] / norm;
            stats.occ[s] += g;
            stats.occ_y[s] += g * rx[t];
            stats.occ_yy[s] += g * rx[t] * rx[t];
            if (t == 0) stats.first[s] = g;
        }
    }
    return stats;
}

inline TrellisSpec random_initial_model(const std::vector<double>& rx, int q,
                                        std::uint64_t seed) {
    const auto [lo_it, hi_it] = std::minmax_element(rx.begin(), rx.end());
    double mean = 0.0;
    for (double y : rx) mean += y;
    mean /= rx.size();
    double var = 0.0;
    for (double y : rx) var += (y - mean) * (y - mean);
    var = rx.size() > 1 ? var / rx.size() : 1.0;
    if (var <= 0.0) var = 1e-6;

    Rng rng(seed);
    TrellisSpec model;
    model.num_states = q;
    model.transitions = Matrix(q, q);
    model.emissions.resize(q);
    model.initial_dist.assign(q, 1.0 / q);
    model.state_symbol.assign(q, 0);
    for (int i = 0; i < q; ++i) {
        model.emissions[i] = {rng.next_uniform(*lo_it, *hi_it), var};
        double sum = 0.0;
        for (int j = 0; j < q; ++j) {
            model.transitions(i, j) = 1.0 + 0.2 * rng.next_unit();
            sum += model.transitions(i, j);
        }
        for (int j = 0; j < q; ++j) model.transitions(i, j) /= sum;
    }
    return model;
}

struct EmRun {
    TrellisSpec model;
    std::vector<double> loglik_history;
};

}  // namespace detail

/// One EM iteration. Returns the re-estimated model and the log-likelihood
/// of `model` (the input) under rx. States with vanishing responsibility
/// keep their previous parameters for the iteration.
inline std::pair<TrellisSpec, double> baum_welch_step(const TrellisSpec& model,
                                                      const std::vector<double>& rx,
                                                      double variance_floor) {
    const int q = model.num_states;
    detail::EmStats stats = detail::em_expectation(model, rx);
    TrellisSpec updated = model;
    for (int i = 0; i < q; ++i) {
        double denom = 0.0;
        for (int j = 0; j < q; ++j) denom += stats.trans_acc(i, j);
        if (denom < 1e-300) continue;  // state never left: keep its row
        for (int j = 0; j < q; ++j) updated.transitions(i, j) = stats.trans_acc(i, j) / denom;
    }
    for (int j = 0; j < q; ++j) {
        if (stats.occ[j] < 1e-12) continue;  // unused state: freeze parameters
        const double mu = stats.occ_y[j] / stats.occ[j];
        const double var = stats.occ_yy[j] / stats.occ[j] - mu * mu;
        updated.emissions[j].mean = mu;
        updated.emissions[j].variance = std::max(var, variance_floor);
    }
    const double first_sum = std::accumulate(stats.first.begin(), stats.first.end(), 0.0);
    if (first_sum > 0.0)
        for (int j = 0; j < q; ++j) updated.initial_dist[j] = stats.first[j] / first_sum;
    return {std::move(updated), stats.loglik};
}

namespace detail {

inline EmRun run_em(const std::vector<double>& rx, const BaumWelchConfig& cfg,
                    std::uint64_t seed) {
    EmRun run;
    run.model = random_initial_model(rx, cfg.num_states, seed);
    int quiet_iters = 0;
    for (int iter = 0; iter < cfg.max_iters; ++iter) {
        auto [updated, loglik] = baum_welch_step(run.model, rx, cfg.variance_floor);
        run.model = std::move(updated);
        run.loglik_history.push_back(loglik);
        if (run.loglik_history.size() >= 2) {
            const double prev = run.loglik_history[run.loglik_history.size() - 2];
            const double rel = std::abs(loglik - prev) / std::max(1.0, std::abs(loglik));
            quiet_iters = rel < cfg.loglik_tol ? quiet_iters + 1 : 0;
            if (quiet_iters >= cfg.tol_patience) break;
        }
    }
    return run;
}

}  // namespace detail

/// Unsupervised EM estimation of an HMM with Gaussian emissions. Runs
/// num_restarts independently seeded fits and returns the one with the
/// highest final log-likelihood together with its per-iteration history.
inline std::pair<TrellisSpec, std::vector<double>>
baum_welch(const std::vector<double>& rx, const BaumWelchConfig& cfg) {
    if (rx.empty()) throw InvalidInput("cannot fit an HMM to an empty sequence");
    if (cfg.num_states < 1) throw InvalidParameter("state count must be >= 1");
    if (cfg.max_iters < 1) throw InvalidParameter("max_iters must be >= 1");
    if (!(cfg.variance_floor > 0.0)) throw InvalidParameter("variance floor must be > 0");

    const int restarts = std::max(1, cfg.num_restarts);
    std::vector<std::future<detail::EmRun>> jobs;
    jobs.reserve(restarts);
    for (int k = 0; k < restarts; ++k)
        jobs.push_back(std::async(std::launch::async, [&rx, &cfg, k] {
            return detail::run_em(rx, cfg, derive_seed(cfg.seed, 0x4257, k));
        }));

    detail::EmRun best;
    double best_loglik = -std::numeric_limits<double>::infinity();
    for (auto& job : jobs) {
        detail::EmRun run = job.get();
        if (run.loglik_history.back() > best_loglik) {
            best_loglik = run.loglik_history.back();
            best = std::move(run);
        }
    }
    return {std::move(best.model), std::move(best.loglik_history)};
}

/// Exact minimum-cost bijection between learned and reference states under
/// the (mean, log-variance) squared distance, via bitmask DP.
inline StateAlignment align_states(const TrellisSpec& learned, const TrellisSpec& reference) {
    const int q = learned.num_states;
    if (q != reference.num_states)
        throw InvalidParameter("alignment requires equal state counts");
    if (q > 20) throw InvalidParameter("alignment supports at most 20 states");

    Matrix cost(q, q);
    for (int i = 0; i < q; ++i)
        for (int r = 0; r < q; ++r)
            cost(i, r) = detail::emission_distance(learned.emissions[i], reference.emissions[r]);

    const std::size_t full = std::size_t{1} << q;
    constexpr double kInf = std::numeric_limits<double>::infinity();
    std::vector<double> dp(full, kInf);
    std::vector<int> choice(full, -1);
    dp[0] = 0.0;
    for (std::size_t mask = 0; mask < full; ++mask) {
        if (dp[mask] == kInf) continue;
        const int i = __builtin_popcountll(mask);  // next learned state to assign
        if (i == q) continue;
        for (int r = 0; r < q; ++r) {
            if (mask & (std::size_t{1} << r)) continue;
            const std::size_t next = mask | (std::size_t{1} << r);
            const double cand = dp[mask] + cost(i, r);
            if (cand < dp[next]) {
                dp[next] = cand;
                choice[next] = r;
            }
        }
    }

    StateAlignment alignment;
    alignment.permutation.assign(q, -1);
    alignment.assignment_cost = dp[full - 1];
    std::size_t mask = full - 1;
    for (int i = q - 1; i >= 0; --i) {
        const int r = choice[mask];
        alignment.permutation[i] = r;
        mask &= ~(std::size_t{1} << r);
    }
    return alignment;
}

/// Reorder a learned trellis into reference indexing.
inline TrellisSpec apply_alignment(const TrellisSpec& learned, const StateAlignment& alignment) {
    const int q = learned.num_states;
    TrellisSpec out = learned;
    for (int i = 0; i < q; ++i) {
        const int r = alignment.permutation[i];
        out.emissions[r] = learned.emissions[i];
        out.initial_dist[r] = learned.initial_dist[i];
        out.state_symbol[r] = learned.state_symbol[i];
        for (int j = 0; j < q; ++j)
            out.transitions(alignment.permutation[i], alignment.permutation[j]) =
                learned.transitions(i, j);
    }
    return out;
}

/// For each learned state, the reference state with the closest emission.
/// Unlike align_states this may be many-to-one, which keeps symbol labels
/// correct when EM groups states unevenly (e.g. three states on one symbol).
inline std::vector<int> nearest_reference_states(const TrellisSpec& learned,
                                                 const TrellisSpec& reference) {
    std::vector<int> nearest(learned.num_states);
    for (int i = 0; i < learned.num_states; ++i) {
        int best = 0;
        double best_cost = std::numeric_limits<double>::infinity();
        for (int r = 0; r < reference.num_states; ++r) {
            const double c =
                detail::emission_distance(learned.emissions[i], reference.emissions[r]);
            if (c < best_cost) {
                best_cost = c;
                best = r;
            }
        }
        nearest[i] = best;
    }
    return nearest;
}

/// Attach reference symbol labels to a learned trellis so symbol_posteriors
/// can run on it. Transitions, emissions and the initial distribution stay
/// learned; only the state-to-symbol labeling comes from the reference.
inline TrellisSpec label_learned_trellis(const TrellisSpec& learned,
                                         const TrellisSpec& reference) {
    TrellisSpec labeled = learned;
    labeled.constellation = reference.constellation;
    const auto nearest = nearest_reference_states(learned, reference);
    for (int i = 0; i < learned.num_states; ++i)
        labeled.state_symbol[i] = reference.state_symbol[nearest[i]];
    return labeled;
}

/// BCJR-HMM detection: fit on unlabeled rx_train, label states against the
/// model-based reference, then run forward-backward on rx_test.
inline SoftSymbolOutput hmm_detect(const std::vector<double>& rx_train,
                                   const std::vector<double>& rx_test,
                                   const BaumWelchConfig& cfg,
                                   const TrellisSpec& reference) {
    auto [learned, history] = baum_welch(rx_train, cfg);
    const TrellisSpec labeled = label_learned_trellis(learned, reference);
    const PosteriorGrid grid = forward_backward(labeled, rx_test, /*with_pairs=*/true);
    return symbol_posteriors(grid, labeled);
}

}  // namespace bcjrsim
