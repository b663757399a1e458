#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numeric>
#include <vector>

#include "bcjrsim/channel.hpp"
#include "bcjrsim/hmm.hpp"
#include "bcjrsim/rng.hpp"
#include "bcjrsim/trellis.hpp"
#include "support/oracles.hpp"

using namespace bcjrsim;

namespace {

/// Sample a path + observations from a known Gaussian HMM.
std::vector<double> sample_chain(const TrellisSpec& model, std::size_t len,
                                 std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> rx(len);
    int state = static_cast<int>(
        rng.next_categorical(model.initial_dist.data(), model.num_states));
    for (std::size_t t = 0; t < len; ++t) {
        if (t > 0)
            state = static_cast<int>(
                rng.next_categorical(model.transitions.row(state), model.num_states));
        rx[t] = rng.next_normal(model.emissions[state].mean,
                                std::sqrt(model.emissions[state].variance));
    }
    return rx;
}

TrellisSpec two_state_model() {
    TrellisSpec m;
    m.num_states = 2;
    m.constellation = {-1.0, 1.0};
    m.transitions = Matrix(2, 2);
    m.transitions(0, 0) = 0.9;
    m.transitions(0, 1) = 0.1;
    m.transitions(1, 0) = 0.2;
    m.transitions(1, 1) = 0.8;
    m.emissions = {{-1.0, 0.01}, {1.0, 0.01}};
    m.initial_dist = {0.5, 0.5};
    m.state_symbol = {0, 1};
    return m;
}

}  // namespace

TEST_CASE("baum-welch: single state closed form") {
    Rng rng(3);
    std::vector<double> rx(2000);
    for (auto& y : rx) y = rng.next_normal(0.7, 1.3);
    double mean = std::accumulate(rx.begin(), rx.end(), 0.0) / rx.size();
    double var = 0.0;
    for (double y : rx) var += (y - mean) * (y - mean);
    var /= rx.size();

    BaumWelchConfig cfg;
    cfg.num_states = 1;
    cfg.max_iters = 10;
    const auto [model, history] = baum_welch(rx, cfg);
    REQUIRE(model.transitions(0, 0) == Catch::Approx(1.0).margin(1e-12));
    REQUIRE(model.emissions[0].mean == Catch::Approx(mean).margin(1e-9));
    REQUIRE(model.emissions[0].variance == Catch::Approx(var).margin(1e-9));
}

TEST_CASE("baum-welch: recovers a well-separated two-state chain") {
    const auto truth = two_state_model();
    const auto rx = sample_chain(truth, 100000, 77);

    BaumWelchConfig cfg;
    cfg.num_states = 2;
    cfg.seed = 5;
    const auto [learned, history] = baum_welch(rx, cfg);
    const auto alignment = align_states(learned, truth);
    const auto aligned = apply_alignment(learned, alignment);

    for (int i = 0; i < 2; ++i) {
        REQUIRE(aligned.emissions[i].mean ==
                Catch::Approx(truth.emissions[i].mean).margin(0.02));
        REQUIRE(aligned.emissions[i].variance ==
                Catch::Approx(truth.emissions[i].variance).epsilon(0.10));
        for (int j = 0; j < 2; ++j)
            REQUIRE(aligned.transitions(i, j) ==
                    Catch::Approx(truth.transitions(i, j)).margin(0.02));
    }
}

TEST_CASE("baum-welch step: matches brute-force posterior updates") {
    // One EM iteration on a toy instance, checked against expected counts
    // computed by exhaustive path enumeration.
    Rng rng(11);
    const auto model = oracle::random_trellis(2, rng, false);
    const std::vector<double> rx{0.3, -1.2, 0.9};

    const auto expected = oracle::enumerate_paths(model, rx);
    const auto [updated, loglik] = baum_welch_step(model, rx, 1e-12);
    REQUIRE(loglik == Catch::Approx(expected.loglik).margin(1e-9));

    for (int i = 0; i < 2; ++i) {
        double denom = 0.0;
        std::vector<double> num(2, 0.0);
        for (std::size_t t = 1; t < rx.size(); ++t)
            for (int j = 0; j < 2; ++j) {
                num[j] += expected.pair_post[t](i, j);
                denom += expected.pair_post[t](i, j);
            }
        for (int j = 0; j < 2; ++j)
            REQUIRE(updated.transitions(i, j) == Catch::Approx(num[j] / denom).margin(1e-9));
    }
    for (int j = 0; j < 2; ++j) {
        double occ = 0.0, occ_y = 0.0;
        for (std::size_t t = 0; t < rx.size(); ++t) {
            occ += expected.state_post(t, j);
            occ_y += expected.state_post(t, j) * rx[t];
        }
        const double mu = occ_y / occ;
        double ss = 0.0;
        for (std::size_t t = 0; t < rx.size(); ++t)
            ss += expected.state_post(t, j) * (rx[t] - mu) * (rx[t] - mu);
        REQUIRE(updated.emissions[j].mean == Catch::Approx(mu).margin(1e-9));
        REQUIRE(updated.emissions[j].variance == Catch::Approx(ss / occ).margin(1e-9));
    }
    for (int j = 0; j < 2; ++j)
        REQUIRE(updated.initial_dist[j] ==
                Catch::Approx(expected.state_post(0, j)).margin(1e-9));
}

TEST_CASE("baum-welch: log-likelihood is monotone and rows stay stochastic") {
    Rng rng(23);
    for (int trial = 0; trial < 10; ++trial) {
        const int q = 2 + static_cast<int>(rng.next_below(3));
        const auto truth = oracle::random_trellis(q, rng, false);
        const auto rx = sample_chain(truth, 400, rng.next_u64());

        BaumWelchConfig cfg;
        cfg.num_states = q;
        cfg.max_iters = 60;
        cfg.num_restarts = 1;
        cfg.seed = rng.next_u64();
        const auto [model, history] = baum_welch(rx, cfg);

        for (std::size_t k = 1; k < history.size(); ++k)
            REQUIRE(history[k] >= history[k - 1] - 1e-8 * std::abs(history[k]));
        for (int i = 0; i < q; ++i) {
            double sum = 0.0;
            for (int j = 0; j < q; ++j) sum += model.transitions(i, j);
            REQUIRE(sum == Catch::Approx(1.0).margin(1e-10));
        }
        for (const auto& e : model.emissions) REQUIRE(e.variance >= cfg.variance_floor);
    }
}

TEST_CASE("baum-welch: deterministic for a fixed seed") {
    const auto rx = sample_chain(two_state_model(), 2000, 9);
    BaumWelchConfig cfg;
    cfg.num_states = 2;
    cfg.seed = 42;
    cfg.max_iters = 50;
    const auto a = baum_welch(rx, cfg);
    const auto b = baum_welch(rx, cfg);
    REQUIRE(a.second == b.second);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            REQUIRE(a.first.transitions(i, j) == b.first.transitions(i, j));
}

TEST_CASE("baum-welch: rejects empty input") {
    BaumWelchConfig cfg;
    REQUIRE_THROWS_AS(baum_welch({}, cfg), InvalidInput);
}

TEST_CASE("align: recovers an exact permutation at zero cost") {
    Rng rng(31);
    const auto reference = oracle::random_trellis(4, rng, false);
    StateAlignment shuffle;
    shuffle.permutation = {2, 0, 3, 1};
    const auto permuted = apply_alignment(reference, shuffle);

    const auto alignment = align_states(permuted, reference);
    REQUIRE(alignment.assignment_cost == Catch::Approx(0.0).margin(1e-12));
    // permuted state shuffle.permutation[i] holds reference state i, so the
    // recovered map must invert the shuffle.
    for (int i = 0; i < 4; ++i) REQUIRE(alignment.permutation[shuffle.permutation[i]] == i);
}

TEST_CASE("align: small perturbations stay near the identity cost bound") {
    Rng rng(37);
    const auto reference = oracle::random_trellis(4, rng, false);
    auto perturbed = reference;
    for (auto& e : perturbed.emissions) e.mean += rng.next_uniform(-0.01, 0.01);
    const auto alignment = align_states(perturbed, reference);
    REQUIRE(alignment.assignment_cost <= 4 * 1e-4);
}

TEST_CASE("align: unequal state counts rejected") {
    Rng rng(41);
    const auto a = oracle::random_trellis(2, rng, false);
    const auto b = oracle::random_trellis(3, rng, false);
    REQUIRE_THROWS_AS(align_states(a, b), InvalidParameter);
}

TEST_CASE("labeling: learned duplicate-mean states group by symbol sign") {
    // Table-II-style learned model: two states at -1, two at +1, all with
    // the inverse-linear-SNR variance, against the duplicated BPSK reference.
    TrellisSpec learned;
    learned.num_states = 4;
    learned.constellation = {-1.0, 1.0};
    learned.transitions = Matrix(4, 4, 0.25);
    learned.emissions = {{-1.0, 0.1}, {-1.02, 0.1}, {0.98, 0.1}, {1.0, 0.1}};
    learned.initial_dist = {0.25, 0.25, 0.25, 0.25};
    learned.state_symbol = {0, 0, 0, 0};

    ChannelConfig channel;
    channel.isi = build_isi_profile(1, 1.0);
    channel.noise = {1, 0.8, 0.01, 0.1, 0.0};
    const auto reference = build_reduced_trellis(channel, 2, 1);

    const auto labeled = label_learned_trellis(learned, reference);
    REQUIRE(labeled.state_symbol == std::vector<int>{0, 0, 1, 1});

    // Three-on-one grouping must still label by sign, not force a bijection.
    learned.emissions = {{-1.0, 0.1}, {-0.99, 0.1}, {-1.01, 0.1}, {1.0, 0.1}};
    const auto labeled3 = label_learned_trellis(learned, reference);
    REQUIRE(labeled3.state_symbol == std::vector<int>{0, 0, 0, 1});
}

TEST_CASE("hmm detect: near-noiseless training recovers MAP detection") {
    ChannelConfig channel;
    channel.isi = build_isi_profile(1, 1.0);
    channel.noise = {1, 0.8, 0.01, 0.01, 0.0};

    Rng rng(55);
    std::vector<double> tx_train(4000), tx_test(500);
    for (auto& s : tx_train) s = rng.next_below(2) ? 1.0 : -1.0;
    for (auto& s : tx_test) s = rng.next_below(2) ? 1.0 : -1.0;
    const auto [rx_train, path_train] = simulate_frame(channel, tx_train, 7);
    const auto [rx_test, path_test] = simulate_frame(channel, tx_test, 8);

    const auto reference = build_joint_trellis(channel);
    BaumWelchConfig cfg;
    cfg.num_states = 2;
    cfg.seed = 3;
    const auto soft = hmm_detect(rx_train, rx_test, cfg, reference);
    const auto decisions = map_detect(soft);

    const auto grid = forward_backward(reference, rx_test, true);
    const auto truth = map_detect(symbol_posteriors(grid, reference));
    // t = 0 is excluded: the single-sequence MLE of the initial distribution
    // is a point mass at whichever state opened the training frame, so the
    // learned detector is entitled to disagree on the very first symbol.
    for (std::size_t t = 1; t < decisions.size(); ++t)
        REQUIRE(decisions[t] == truth[t]);
}
