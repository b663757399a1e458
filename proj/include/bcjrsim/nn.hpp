#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "bcjrsim/common.hpp"
#include "bcjrsim/rng.hpp"
#include "bcjrsim/trellis.hpp"

namespace bcjrsim {

struct TrainingDiverged : std::runtime_error {
    int iteration;
    explicit TrainingDiverged(int iter)
        : std::runtime_error("training loss became non-finite at iteration " +
                             std::to_string(iter)),
          iteration(iter) {}
};

/// 1 -> 100 (sigmoid) -> 50 (ReLU) -> Q (softmax) classifier from a
/// received scalar to a state posterior. Parameters live in one flat
/// vector so the optimizer and finite-difference checks can treat them
/// uniformly; the offsets below define the layout.
struct NnParams {
    static constexpr int kHidden1 = 100;
    static constexpr int kHidden2 = 50;

    int num_classes = 0;
    std::vector<double> theta;

    static std::size_t param_count(int num_classes) {
        return 2 * kHidden1 + kHidden2 * kHidden1 + kHidden2 +
               static_cast<std::size_t>(num_classes) * kHidden2 + num_classes;
    }
    std::size_t w1() const { return 0; }
    std::size_t b1() const { return kHidden1; }
    std::size_t w2() const { return 2 * kHidden1; }
    std::size_t b2() const { return 2 * kHidden1 + kHidden2 * kHidden1; }
    std::size_t w3() const { return b2() + kHidden2; }
    std::size_t b3() const { return w3() + static_cast<std::size_t>(num_classes) * kHidden2; }
};

/// K-component 1-D Gaussian mixture approximating the marginal p(y).
struct GmmMarginal {
    std::vector<double> weights;
    std::vector<double> means;
    std::vector<double> variances;

    double pdf(double y) const {
        double p = 0.0;
        for (std::size_t k = 0; k < weights.size(); ++k)
            p += weights[k] * gaussian_pdf(y, means[k], variances[k]);
        return p;
    }
};

/// Supervised pairs {y_t, s_t}; labels index the detector's state space.
struct LabeledDataset {
    std::vector<double> observations;
    std::vector<int> labels;
};

struct TrainOptions {
    int iterations = 20000;
    int batch_size = 256;
    double learning_rate = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

namespace detail {

inline void nn_forward(const NnParams& nn, double y, double* h1, double* h2,
                       double* logits) {
    const double* th = nn.theta.data();
    const int q = nn.num_classes;
    for (int i = 0; i < NnParams::kHidden1; ++i) {
        const double pre = th[nn.w1() + i] * y + th[nn.b1() + i];
        h1[i] = 1.0 / (1.0 + std::exp(-pre));
    }
    for (int j = 0; j < NnParams::kHidden2; ++j) {
        const double* w = th + nn.w2() + static_cast<std::size_t>(j) * NnParams::kHidden1;
        double pre = th[nn.b2() + j];
        for (int i = 0; i < NnParams::kHidden1; ++i) pre += w[i] * h1[i];
        h2[j] = pre > 0.0 ? pre : 0.0;
    }
    for (int k = 0; k < q; ++k) {
        const double* w = th + nn.w3() + static_cast<std::size_t>(k) * NnParams::kHidden2;
        double pre = th[nn.b3() + k];
        for (int j = 0; j < NnParams::kHidden2; ++j) pre += w[j] * h2[j];
        logits[k] = pre;
    }
}

inline void softmax_inplace(double* logits, int n) {
    double mx = logits[0];
    for (int k = 1; k < n; ++k) mx = std::max(mx, logits[k]);
    double sum = 0.0;
    for (int k = 0; k < n; ++k) {
        logits[k] = std::exp(logits[k] - mx);
        sum += logits[k];
    }
    for (int k = 0; k < n; ++k) logits[k] /= sum;
}

/// Mean cross-entropy over the batch and its gradient w.r.t. every
/// parameter. Exposed (through this namespace) for the finite-difference
/// tests, which must be able to evaluate the same loss the optimizer uses.
inline double nn_loss_and_gradient(const NnParams& nn, const double* ys,
                                   const int* labels, std::size_t batch,
                                   std::vector<double>* grad) {
    const int q = nn.num_classes;
    if (grad) grad->assign(nn.theta.size(), 0.0);
    std::vector<double> h1(NnParams::kHidden1), h2(NnParams::kHidden2), logits(q);
    std::vector<double> dlogits(q), dh2(NnParams::kHidden2), dh1(NnParams::kHidden1);
    const double* th = nn.theta.data();
    double loss = 0.0;

    for (std::size_t n = 0; n < batch; ++n) {
        nn_forward(nn, ys[n], h1.data(), h2.data(), logits.data());
        double mx = logits[0];
        for (int k = 1; k < q; ++k) mx = std::max(mx, logits[k]);
        double sum = 0.0;
        for (int k = 0; k < q; ++k) sum += std::exp(logits[k] - mx);
        const double lse = mx + std::log(sum);
        loss += lse - logits[labels[n]];
        if (!grad) continue;

        double* g = grad->data();
        for (int k = 0; k < q; ++k)
            dlogits[k] = std::exp(logits[k] - lse) - (k == labels[n] ? 1.0 : 0.0);
        for (int k = 0; k < q; ++k) {
            double* gw = g + nn.w3() + static_cast<std::size_t>(k) * NnParams::kHidden2;
            for (int j = 0; j < NnParams::kHidden2; ++j) gw[j] += dlogits[k] * h2[j];
            g[nn.b3() + k] += dlogits[k];
        }
        std::fill(dh2.begin(), dh2.end(), 0.0);
        for (int k = 0; k < q; ++k) {
            const double* w = th + nn.w3() + static_cast<std::size_t>(k) * NnParams::kHidden2;
            for (int j = 0; j < NnParams::kHidden2; ++j) dh2[j] += w[j] * dlogits[k];
        }
        for (int j = 0; j < NnParams::kHidden2; ++j)
            if (h2[j] <= 0.0) dh2[j] = 0.0;
        for (int j = 0; j < NnParams::kHidden2; ++j) {
            double* gw = g + nn.w2() + static_cast<std::size_t>(j) * NnParams::kHidden1;
            for (int i = 0; i < NnParams::kHidden1; ++i) gw[i] += dh2[j] * h1[i];
            g[nn.b2() + j] += dh2[j];
        }
        std::fill(dh1.begin(), dh1.end(), 0.0);
        for (int j = 0; j < NnParams::kHidden2; ++j) {
            const double* w = th + nn.w2() + static_cast<std::size_t>(j) * NnParams::kHidden1;
            for (int i = 0; i < NnParams::kHidden1; ++i) dh1[i] += w[i] * dh2[j];
        }
        for (int i = 0; i < NnParams::kHidden1; ++i) {
            const double dpre = dh1[i] * h1[i] * (1.0 - h1[i]);
            g[nn.w1() + i] += dpre * ys[n];
            g[nn.b1() + i] += dpre;
        }
    }

    const double inv_b = 1.0 / static_cast<double>(batch);
    if (grad)
        for (double& v : *grad) v *= inv_b;
    return loss * inv_b;
}

inline NnParams init_params(int num_classes, std::uint64_t seed) {
    NnParams nn;
    nn.num_classes = num_classes;
    nn.theta.assign(NnParams::param_count(num_classes), 0.0);
    Rng rng(seed);
    auto fill = [&](std::size_t offset, std::size_t count, int fan_in) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        for (std::size_t k = 0; k < count; ++k)
            nn.theta[offset + k] = rng.next_uniform(-bound, bound);
    };
    fill(nn.w1(), NnParams::kHidden1, 1);
    fill(nn.w2(), static_cast<std::size_t>(NnParams::kHidden2) * NnParams::kHidden1,
         NnParams::kHidden1);
    fill(nn.w3(), static_cast<std::size_t>(num_classes) * NnParams::kHidden2,
         NnParams::kHidden2);
    return nn;
}

}  // namespace detail

/// Classifier posterior p(s|y) for one observation.
inline std::vector<double> classify(const NnParams& nn, double y) {
    std::vector<double> h1(NnParams::kHidden1), h2(NnParams::kHidden2), post(nn.num_classes);
    detail::nn_forward(nn, y, h1.data(), h2.data(), post.data());
    detail::softmax_inplace(post.data(), nn.num_classes);
    return post;
}

/// Posteriors for a whole received sequence (T x Q).
inline Matrix classify_batch(const NnParams& nn, const std::vector<double>& ys) {
    Matrix post(ys.size(), nn.num_classes);
    std::vector<double> h1(NnParams::kHidden1), h2(NnParams::kHidden2);
    for (std::size_t t = 0; t < ys.size(); ++t) {
        detail::nn_forward(nn, ys[t], h1.data(), h2.data(), post.row(t));
        detail::softmax_inplace(post.row(t), nn.num_classes);
    }
    return post;
}

/// Minimize average cross-entropy with Adam over uniformly resampled
/// minibatches. Deterministic given the seed; returns per-iteration loss.
inline std::pair<NnParams, std::vector<double>>
train_classifier(const LabeledDataset& data, int num_classes, std::uint64_t seed,
                 const TrainOptions& opts = {}) {
    if (data.observations.empty() || data.observations.size() != data.labels.size())
        throw InvalidInput("training set empty or misshapen");
    std::vector<char> seen(num_classes, 0);
    for (int label : data.labels) {
        if (label < 0 || label >= num_classes)
            throw InvalidInput("label outside [0, Q)");
        seen[label] = 1;
    }
    for (int k = 0; k < num_classes; ++k)
        if (!seen[k])
            std::cerr << "warning: class " << k << " has no training examples\n";

    NnParams nn = detail::init_params(num_classes, derive_seed(seed, 0x11));
    Rng batch_rng(derive_seed(seed, 0x22));
    const std::size_t n_params = nn.theta.size();
    std::vector<double> grad, m(n_params, 0.0), v(n_params, 0.0);
    std::vector<double> ys(opts.batch_size);
    std::vector<int> labels(opts.batch_size);
    std::vector<double> loss_history;
    loss_history.reserve(opts.iterations);

    for (int iter = 0; iter < opts.iterations; ++iter) {
        for (int b = 0; b < opts.batch_size; ++b) {
            const std::size_t idx = batch_rng.next_below(data.observations.size());
            ys[b] = data.observations[idx];
            labels[b] = data.labels[idx];
        }
        const double loss =
            detail::nn_loss_and_gradient(nn, ys.data(), labels.data(), opts.batch_size, &grad);
        if (!std::isfinite(loss)) throw TrainingDiverged(iter);
        loss_history.push_back(loss);

        const double bc1 = 1.0 - std::pow(opts.beta1, iter + 1);
        const double bc2 = 1.0 - std::pow(opts.beta2, iter + 1);
        for (std::size_t k = 0; k < n_params; ++k) {
            m[k] = opts.beta1 * m[k] + (1.0 - opts.beta1) * grad[k];
            v[k] = opts.beta2 * v[k] + (1.0 - opts.beta2) * grad[k] * grad[k];
            nn.theta[k] -= opts.learning_rate * (m[k] / bc1) /
                           (std::sqrt(v[k] / bc2) + opts.epsilon);
        }
        for (double p : nn.theta)
            if (!std::isfinite(p)) throw TrainingDiverged(iter);
    }
    return {std::move(nn), std::move(loss_history)};
}

/// EM fit of a K-component mixture to the received marginal.
inline GmmMarginal fit_marginal(const std::vector<double>& rx, int k_components,
                                std::uint64_t seed, int max_iters = 500) {
    if (k_components <= 0) throw InvalidParameter("component count must be positive");
    if (rx.size() < 10 * static_cast<std::size_t>(k_components))
        throw InvalidInput("marginal fit needs at least 10 samples per component");

    const std::size_t n = rx.size();
    double mean = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
    double var = 0.0;
    for (double y : rx) var += (y - mean) * (y - mean);
    var = std::max(var / n, 1e-12);

    GmmMarginal gmm;
    gmm.weights.assign(k_components, 1.0 / k_components);
    gmm.variances.assign(k_components, var);
    gmm.means.resize(k_components);
    std::vector<double> sorted(rx);
    std::sort(sorted.begin(), sorted.end());
    Rng rng(seed);
    for (int k = 0; k < k_components; ++k) {
        const std::size_t idx = static_cast<std::size_t>((k + 0.5) / k_components * (n - 1));
        gmm.means[k] = sorted[idx] + 0.01 * std::sqrt(var) * rng.next_normal();
    }
    if (k_components == 1) {
        gmm.means[0] = mean;
        gmm.variances[0] = var;
        return gmm;
    }

    std::vector<double> resp(k_components);
    double prev_loglik = -std::numeric_limits<double>::infinity();
    for (int iter = 0; iter < max_iters; ++iter) {
        std::vector<double> w_acc(k_components, 0.0), y_acc(k_components, 0.0),
            yy_acc(k_components, 0.0);
        double loglik = 0.0;
        for (double y : rx) {
            double total = 0.0;
            for (int k = 0; k < k_components; ++k) {
                resp[k] = gmm.weights[k] * gaussian_pdf(y, gmm.means[k], gmm.variances[k]);
                total += resp[k];
            }
            if (total <= 0.0) total = 1e-300;
            loglik += std::log(total);
            for (int k = 0; k < k_components; ++k) {
                const double r = resp[k] / total;
                w_acc[k] += r;
                y_acc[k] += r * y;
                yy_acc[k] += r * y * y;
            }
        }
        for (int k = 0; k < k_components; ++k) {
            if (w_acc[k] < 1e-12) continue;
            gmm.weights[k] = w_acc[k] / n;
            gmm.means[k] = y_acc[k] / w_acc[k];
            gmm.variances[k] =
                std::max(yy_acc[k] / w_acc[k] - gmm.means[k] * gmm.means[k], 1e-12);
        }
        double wsum = std::accumulate(gmm.weights.begin(), gmm.weights.end(), 0.0);
        for (double& w : gmm.weights) w /= wsum;
        if (iter > 0 && std::abs(loglik - prev_loglik) < 1e-10 * std::abs(loglik)) break;
        prev_loglik = loglik;
    }
    return gmm;
}

/// Bayes inversion p(y|s_j) = p(s_j|y) p(y) / p(s_j).
inline std::vector<double> nn_likelihood(double y, const NnParams& nn,
                                         const GmmMarginal& gmm,
                                         const std::vector<double>& state_prior) {
    for (double p : state_prior)
        if (!(p > 0.0)) throw InvalidParameter("state prior must be strictly positive");
    std::vector<double> lik = classify(nn, y);
    const double marginal = gmm.pdf(y);
    for (std::size_t j = 0; j < lik.size(); ++j) lik[j] = lik[j] * marginal / state_prior[j];
    return lik;
}

/// Likelihood matrix for a sequence; `class_map` (optional) routes each
/// trellis state to the NN class it should read, which is how learned
/// (hybrid) trellises consume likelihoods estimated on the model-based
/// state space. Empty map = identity.
inline Matrix nn_likelihood_matrix(const std::vector<double>& rx, const NnParams& nn,
                                   const GmmMarginal& gmm,
                                   const std::vector<double>& class_prior,
                                   int num_states = -1,
                                   const std::vector<int>& class_map = {}) {
    for (double p : class_prior)
        if (!(p > 0.0)) throw InvalidParameter("state prior must be strictly positive");
    const int q = num_states < 0 ? nn.num_classes : num_states;
    Matrix class_post = classify_batch(nn, rx);
    Matrix lik(rx.size(), q);
    for (std::size_t t = 0; t < rx.size(); ++t) {
        const double marginal = gmm.pdf(rx[t]);
        for (int s = 0; s < q; ++s) {
            const int cls = class_map.empty() ? s : class_map[s];
            lik(t, s) = class_post(t, cls) * marginal / class_prior[cls];
        }
    }
    return lik;
}

/// BCJR-NN detection: trellis supplies transitions and symbol labels, the
/// classifier + mixture supply the branch likelihoods.
inline SoftSymbolOutput nn_detect(const TrellisSpec& trellis, const NnParams& nn,
                                  const GmmMarginal& gmm, const std::vector<double>& rx_test,
                                  const std::vector<int>& class_map = {},
                                  std::vector<double> class_prior = {}) {
    if (class_map.empty() && trellis.num_states != nn.num_classes)
        throw InvalidParameter("trellis states != classifier classes");
    if (class_prior.empty()) class_prior = trellis.initial_dist;
    const Matrix lik =
        nn_likelihood_matrix(rx_test, nn, gmm, class_prior, trellis.num_states, class_map);
    const PosteriorGrid grid = forward_backward_lik(trellis, lik, /*with_pairs=*/true);
    return symbol_posteriors(grid, trellis);
}

}  // namespace bcjrsim
