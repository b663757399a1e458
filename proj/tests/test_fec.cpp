#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "bcjrsim/channel.hpp"
#include "bcjrsim/fec.hpp"
#include "bcjrsim/rng.hpp"
#include "bcjrsim/trellis.hpp"

using namespace bcjrsim;

namespace {

std::vector<int> random_bits(std::size_t len, Rng& rng) {
    std::vector<int> bits(len);
    for (auto& b : bits) b = static_cast<int>(rng.next_below(2));
    return bits;
}

std::vector<double> saturated_llrs(const std::vector<int>& coded, double magnitude = 1e6) {
    std::vector<double> llrs(coded.size());
    for (std::size_t k = 0; k < coded.size(); ++k)
        llrs[k] = coded[k] == 0 ? magnitude : -magnitude;
    return llrs;
}

}  // namespace

TEST_CASE("encode: zero input gives zero output of the right length") {
    const auto coded = conv_encode(std::vector<int>(10, 0));
    REQUIRE(coded.size() == 2 * (10 + 6));
    for (int c : coded) REQUIRE(c == 0);
}

TEST_CASE("encode: impulse response interlaces the two generators") {
    // (171)_8 = 1111001, (133)_8 = 1011011, coefficients of u_t .. u_{t-6}.
    const std::vector<int> g1{1, 1, 1, 1, 0, 0, 1};
    const std::vector<int> g2{1, 0, 1, 1, 0, 1, 1};
    std::vector<int> impulse(7, 0);
    impulse[0] = 1;
    const auto coded = conv_encode(impulse);
    for (int k = 0; k < 7; ++k) {
        REQUIRE(coded[2 * k] == g1[k]);
        REQUIRE(coded[2 * k + 1] == g2[k]);
    }
}

TEST_CASE("encode: linearity over random pairs") {
    Rng rng(5);
    for (int trial = 0; trial < 200; ++trial) {
        const auto a = random_bits(64, rng);
        const auto b = random_bits(64, rng);
        std::vector<int> both(64);
        for (int k = 0; k < 64; ++k) both[k] = a[k] ^ b[k];
        const auto ca = conv_encode(a);
        const auto cb = conv_encode(b);
        const auto cab = conv_encode(both);
        for (std::size_t k = 0; k < cab.size(); ++k) REQUIRE(cab[k] == (ca[k] ^ cb[k]));
    }
}

TEST_CASE("decode: saturated LLRs recover the exact codeword") {
    Rng rng(9);
    for (int trial = 0; trial < 50; ++trial) {
        const auto info = random_bits(120, rng);
        const auto coded = conv_encode(info);
        REQUIRE(soft_decode(saturated_llrs(coded)) == info);
    }
}

TEST_CASE("decode: corrects up to two hard sign flips") {
    Rng rng(13);
    for (int trial = 0; trial < 50; ++trial) {
        const auto info = random_bits(100, rng);
        const auto coded = conv_encode(info);
        auto llrs = saturated_llrs(coded, 1.0);
        const std::size_t i = rng.next_below(llrs.size());
        std::size_t j = rng.next_below(llrs.size());
        while (j == i) j = rng.next_below(llrs.size());
        llrs[i] = -llrs[i];
        llrs[j] = -llrs[j];
        REQUIRE(soft_decode(llrs) == info);
    }
}

TEST_CASE("decode: invariant to positive LLR scaling") {
    Rng rng(17);
    const auto info = random_bits(200, rng);
    const auto coded = conv_encode(info);
    std::vector<double> llrs(coded.size());
    for (std::size_t k = 0; k < coded.size(); ++k)
        llrs[k] = (coded[k] == 0 ? 1.0 : -1.0) + rng.next_normal(0.0, 1.2);
    auto scaled = llrs;
    for (double& v : scaled) v *= 37.5;
    REQUIRE(soft_decode(llrs) == soft_decode(scaled));
}

TEST_CASE("decode: rejects bad lengths") {
    REQUIRE_THROWS_AS(soft_decode(std::vector<double>(11, 0.0)), InvalidInput);
}

TEST_CASE("free distance: bounded search reaches 10") {
    REQUIRE(free_distance_bound(40) == 10);
    REQUIRE(free_distance_bound(60) == 10);
}

TEST_CASE("interleaver: identity and random round trips") {
    const auto id = Interleaver::identity(16);
    const std::vector<int> data{1, 0, 1, 1, 0, 0, 1, 0, 1, 1, 1, 0, 0, 1, 0, 1};
    REQUIRE(interleave(data, id) == data);

    Rng rng(21);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t len = 2 + rng.next_below(600);
        const auto ilv = Interleaver::random(len, rng.next_u64());
        std::vector<double> soft(len);
        for (auto& v : soft) v = rng.next_normal(0.0, 3.0);
        REQUIRE(deinterleave(interleave(soft, ilv), ilv) == soft);

        // Permutation is a bijection.
        std::vector<char> seen(len, 0);
        for (std::size_t p : ilv.permutation) {
            REQUIRE(p < len);
            REQUIRE(!seen[p]);
            seen[p] = 1;
        }
    }
    REQUIRE_THROWS_AS(interleave(data, Interleaver::identity(8)), InvalidInput);
}

TEST_CASE("coded BPSK over AWGN at 5 dB decodes essentially error-free") {
    // End-to-end sanity against the classical waterfall: Eb/N0 = 1/sigma^2
    // for this rate-1/2 setup, and the union bound at 5 dB sits near 1e-6.
    const double sigma2 = db_to_noise_power(5.0);
    ChannelConfig channel;
    channel.isi = build_isi_profile(1, 1.0);
    channel.noise = {1, 0.8, 0.01, sigma2, 0.0};
    const auto trellis = build_joint_trellis(channel);

    Rng rng(2718);
    const std::size_t info_len = 100000;
    long long errors = 0;
    for (int frame = 0; frame < 2; ++frame) {
        const auto info = random_bits(info_len / 2, rng);
        const auto coded = conv_encode(info);
        std::vector<double> tx(coded.size());
        for (std::size_t k = 0; k < coded.size(); ++k) tx[k] = coded[k] == 0 ? 1.0 : -1.0;
        const auto [rx, path] = simulate_frame(channel, tx, rng.next_u64());
        const auto grid = forward_backward(trellis, rx, true);
        const auto soft = symbol_posteriors(grid, trellis);
        const auto decoded = soft_decode(soft.llr);
        for (std::size_t k = 0; k < info.size(); ++k)
            if (decoded[k] != info[k]) ++errors;
    }
    REQUIRE(static_cast<double>(errors) / info_len < 1e-5);
}
