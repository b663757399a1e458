#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "bcjrsim/channel.hpp"
#include "bcjrsim/common.hpp"
#include "bcjrsim/fec.hpp"
#include "bcjrsim/hmm.hpp"
#include "bcjrsim/nn.hpp"
#include "bcjrsim/parallel.hpp"
#include "bcjrsim/rng.hpp"
#include "bcjrsim/serialize.hpp"
#include "bcjrsim/trellis.hpp"

namespace bcjrsim {

inline constexpr const char* kVersion = "0.1.0";

enum class DetectorType { FullCsi, Model, Hmm, Nn, Hybrid };

/// Per-detector knobs. assumed_* of -1 mean "the true channel value";
/// training fields only apply to the data-driven detectors.
struct DetectorSettings {
    std::string name;
    DetectorType type = DetectorType::FullCsi;
    int assumed_memory = -1;
    int assumed_levels = -1;

    // Model-based likelihood mismatch (the "inaccurate CSI" scenarios):
    // likelihoods are computed under a tap-deviation model that the true
    // transmission may not have. "sampled" draws fresh tap noise per symbol
    // (the time-varying reading); "inflated" folds it into the variance.
    double lik_tap_deviation = 0.0;
    bool lik_taps_sampled = true;

    std::size_t train_symbols = 0;      // 0: use the sweep-level default
    double train_tap_deviation = -1.0;  // <0: the true channel value

    int em_max_iters = 1500;
    int em_restarts = 3;
    double em_tol = 1e-9;
    double variance_floor = 1e-8;

    int nn_iterations = 20000;
    int nn_batch = 256;
    double nn_learning_rate = 0.01;
    int gmm_components = 0;  // 0: one per detector state
};

struct ExperimentConfig {
    ChannelConfig channel;          // noise.total_power is overridden per point
    std::vector<double> sweep_db;
    std::size_t frame_symbols = 100000;
    int trials = 20;
    bool coded = true;
    bool interleaved = true;
    std::uint64_t seed = 1;
    std::size_t train_symbols = 0;  // 0: frame_symbols
    std::vector<DetectorSettings> detectors;
    std::string output_path = "results.csv";
};

struct TrialCount {
    long long symbol_errors = 0;
    long long bit_errors = 0;
};

struct PointDetectorResult {
    std::string detector;
    double db = 0.0;
    long trials = 0;
    long frames = 0;
    long long symbol_errors = 0;
    long long bit_errors = 0;
    long long symbols = 0;
    long long bits = 0;
    double ser = 0.0, ber = 0.0;
    double stderr_ser = 0.0, stderr_ber = 0.0;
    std::vector<TrialCount> per_trial;  // not serialized

    bool operator==(const PointDetectorResult& o) const {
        return detector == o.detector && db == o.db && trials == o.trials &&
               frames == o.frames && symbol_errors == o.symbol_errors &&
               bit_errors == o.bit_errors && ser == o.ser && ber == o.ber &&
               stderr_ser == o.stderr_ser && stderr_ber == o.stderr_ber;
    }
};

struct SweepResult {
    std::vector<PointDetectorResult> rows;
    std::vector<std::string> point_errors;
    std::uint64_t config_hash = 0;
    std::uint64_t seed = 0;
    double wall_seconds = 0.0;
};

// ---------------------------------------------------------------------------
// Config (de)serialization

inline nlohmann::json to_json(const ExperimentConfig& cfg) {
    nlohmann::json j;
    j["channel"] = {{"memory", cfg.channel.isi.memory},
                    {"decay_rate", cfg.channel.isi.decay_rate},
                    {"tap_deviation", cfg.channel.isi.tap_deviation},
                    {"levels", cfg.channel.noise.levels},
                    {"impulsive_index", cfg.channel.noise.impulsive_index},
                    {"background_ratio", cfg.channel.noise.background_ratio},
                    {"correlation", cfg.channel.noise.correlation}};
    j["sweep_db"] = cfg.sweep_db;
    j["frame_symbols"] = cfg.frame_symbols;
    j["trials"] = cfg.trials;
    j["coded"] = cfg.coded;
    j["interleaved"] = cfg.interleaved;
    j["seed"] = cfg.seed;
    j["train_symbols"] = cfg.train_symbols;
    j["output"] = cfg.output_path;
    j["detectors"] = nlohmann::json::array();
    for (const auto& d : cfg.detectors) {
        nlohmann::json dj;
        dj["name"] = d.name;
        switch (d.type) {
            case DetectorType::FullCsi: dj["type"] = "full-csi"; break;
            case DetectorType::Model: dj["type"] = "model"; break;
            case DetectorType::Hmm: dj["type"] = "hmm"; break;
            case DetectorType::Nn: dj["type"] = "nn"; break;
            case DetectorType::Hybrid: dj["type"] = "hybrid"; break;
        }
        dj["assumed_memory"] = d.assumed_memory;
        dj["assumed_levels"] = d.assumed_levels;
        dj["lik_tap_deviation"] = d.lik_tap_deviation;
        dj["lik_taps_sampled"] = d.lik_taps_sampled;
        dj["train_symbols"] = d.train_symbols;
        dj["train_tap_deviation"] = d.train_tap_deviation;
        dj["em_max_iters"] = d.em_max_iters;
        dj["em_restarts"] = d.em_restarts;
        dj["em_tol"] = d.em_tol;
        dj["variance_floor"] = d.variance_floor;
        dj["nn_iterations"] = d.nn_iterations;
        dj["nn_batch"] = d.nn_batch;
        dj["nn_learning_rate"] = d.nn_learning_rate;
        dj["gmm_components"] = d.gmm_components;
        j["detectors"].push_back(dj);
    }
    return j;
}

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
    ExperimentConfig cfg;
    const auto& ch = j.at("channel");
    cfg.channel.isi = build_isi_profile(ch.at("memory").get<int>(),
                                        ch.value("decay_rate", 1.0),
                                        ch.value("tap_deviation", 0.0));
    cfg.channel.noise.levels = ch.value("levels", 1);
    cfg.channel.noise.impulsive_index = ch.value("impulsive_index", 0.8);
    cfg.channel.noise.background_ratio = ch.value("background_ratio", 0.01);
    cfg.channel.noise.correlation = ch.value("correlation", 0.0);
    cfg.channel.noise.total_power = 1.0;  // set per sweep point
    cfg.sweep_db = j.at("sweep_db").get<std::vector<double>>();
    if (cfg.sweep_db.empty()) throw InvalidParameter("sweep_db must be nonempty");
    cfg.frame_symbols = j.at("frame_symbols").get<std::size_t>();
    if (cfg.frame_symbols < 10 * static_cast<std::size_t>(cfg.channel.isi.memory))
        throw InvalidParameter("frame_symbols must be at least 10*L");
    cfg.trials = j.value("trials", 20);
    cfg.coded = j.value("coded", true);
    cfg.interleaved = j.value("interleaved", true);
    cfg.seed = j.value("seed", std::uint64_t{1});
    cfg.train_symbols = j.value("train_symbols", std::size_t{0});
    cfg.output_path = j.value("output", std::string("results.csv"));
    for (const auto& dj : j.at("detectors")) {
        DetectorSettings d;
        d.name = dj.at("name").get<std::string>();
        const std::string type = dj.at("type").get<std::string>();
        if (type == "full-csi")
            d.type = DetectorType::FullCsi;
        else if (type == "model")
            d.type = DetectorType::Model;
        else if (type == "hmm")
            d.type = DetectorType::Hmm;
        else if (type == "nn")
            d.type = DetectorType::Nn;
        else if (type == "hybrid")
            d.type = DetectorType::Hybrid;
        else
            throw InvalidParameter("unknown detector type: " + type);
        d.assumed_memory = dj.value("assumed_memory", -1);
        d.assumed_levels = dj.value("assumed_levels", -1);
        d.lik_tap_deviation = dj.value("lik_tap_deviation", 0.0);
        d.lik_taps_sampled = dj.value("lik_taps_sampled", true);
        d.train_symbols = dj.value("train_symbols", std::size_t{0});
        d.train_tap_deviation = dj.value("train_tap_deviation", -1.0);
        d.em_max_iters = dj.value("em_max_iters", 1500);
        d.em_restarts = dj.value("em_restarts", 3);
        d.em_tol = dj.value("em_tol", 1e-9);
        d.variance_floor = dj.value("variance_floor", 1e-8);
        d.nn_iterations = dj.value("nn_iterations", 20000);
        d.nn_batch = dj.value("nn_batch", 256);
        d.nn_learning_rate = dj.value("nn_learning_rate", 0.01);
        d.gmm_components = dj.value("gmm_components", 0);
        cfg.detectors.push_back(std::move(d));
    }
    if (cfg.detectors.empty()) throw InvalidParameter("at least one detector required");
    return cfg;
}

inline std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        hash ^= c;
        hash *= 0x100000001b3ULL;
    }
    return hash;
}

inline std::uint64_t config_hash(const ExperimentConfig& cfg) {
    return fnv1a64(to_json(cfg).dump());
}

// ---------------------------------------------------------------------------
// Detector preparation and per-frame detection

namespace detail {

/// Every per-point trained/derived object a detector needs at frame time.
struct DetectorRuntime {
    DetectorSettings settings;
    TrellisSpec reference;   // model-based trellis for the assumed (L, N)
    TrellisSpec detection;   // trellis actually run (learned for hmm/hybrid)
    bool use_nn = false;
    NnParams nn;
    GmmMarginal gmm;
    std::vector<int> class_map;      // detection state -> NN class
    std::vector<double> class_prior; // prior over NN classes
    bool sampled_taps = false;       // per-symbol tap noise in likelihoods
    Matrix state_symbol_values;      // Q x L symbol histories for sampled taps
    std::vector<double> base_taps;   // assumed tap profile for sampled mode
};

inline std::vector<double> random_symbols(const ChannelConfig& channel, std::size_t count,
                                          std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> symbols(count);
    for (auto& s : symbols)
        s = channel.constellation[rng.next_below(channel.constellation.size())];
    return symbols;
}

inline std::vector<double> with_guard(const ChannelConfig& channel,
                                      std::vector<double> payload) {
    const int guard = channel.isi.memory - 1;
    std::vector<double> tx(guard, channel.constellation.back());
    tx.insert(tx.end(), payload.begin(), payload.end());
    return tx;
}

/// Supervised labels for the assumed (L, N) state space. ISI digits come
/// from the transmitted symbols, the noise level from the hidden path;
/// assumed_levels must be 1 (drop the noise coordinate, the reduced-state
/// scenario) or the true level count.
inline LabeledDataset build_labels(const ChannelConfig& channel,
                                   const std::vector<double>& tx_full,
                                   const std::vector<double>& rx,
                                   const std::vector<int>& state_path,
                                   int assumed_memory, int assumed_levels) {
    const int true_memory = channel.isi.memory;
    const int true_levels = channel.noise.levels;
    const int alphabet = static_cast<int>(channel.constellation.size());
    if (assumed_levels != 1 && assumed_levels != true_levels)
        throw InvalidParameter("assumed noise levels must be 1 or the true count");

    LabeledDataset data;
    for (std::size_t k = 0; k < rx.size(); ++k) {
        const std::size_t t = k + true_memory - 1;
        if (static_cast<int>(t) < assumed_memory - 1) continue;  // short history
        int isi = 0;
        int weight = 1;
        for (int l = 0; l < assumed_memory; ++l) {
            const double sym = tx_full[t - l];
            int digit = 0;
            for (int d = 0; d < alphabet; ++d)
                if (channel.constellation[d] == sym) digit = d;
            isi += digit * weight;
            weight *= alphabet;
        }
        const int level = assumed_levels == 1 ? 0 : state_path[k] % true_levels;
        data.observations.push_back(rx[k]);
        data.labels.push_back(isi * assumed_levels + level);
    }
    return data;
}

inline DetectorRuntime prepare_detector(const ExperimentConfig& cfg,
                                        const ChannelConfig& channel,
                                        std::size_t point, std::size_t det_index) {
    DetectorRuntime rt;
    rt.settings = cfg.detectors[det_index];
    const auto& st = rt.settings;
    const int assumed_memory = st.assumed_memory > 0 ? st.assumed_memory : channel.isi.memory;
    const int assumed_levels = st.assumed_levels > 0 ? st.assumed_levels : channel.noise.levels;
    rt.reference = build_reduced_trellis(channel, assumed_memory, assumed_levels);

    const bool trains = st.type == DetectorType::Hmm || st.type == DetectorType::Nn ||
                        st.type == DetectorType::Hybrid;
    std::vector<double> rx_train;
    std::vector<int> path_train;
    std::vector<double> tx_train;
    if (trains) {
        std::size_t n = st.train_symbols ? st.train_symbols
                                         : (cfg.train_symbols ? cfg.train_symbols
                                                              : cfg.frame_symbols);
        ChannelConfig train_channel = channel;
        if (st.train_tap_deviation >= 0.0)
            train_channel.isi.tap_deviation = st.train_tap_deviation;
        tx_train = with_guard(channel, random_symbols(channel, n,
                                   derive_seed(cfg.seed, 0xA11, point, det_index)));
        auto sim = simulate_frame(train_channel, tx_train,
                                  derive_seed(cfg.seed, 0xA22, point, det_index));
        rx_train = std::move(sim.first);
        path_train = std::move(sim.second);
    }

    TrellisSpec learned;
    if (st.type == DetectorType::Hmm || st.type == DetectorType::Hybrid) {
        BaumWelchConfig bw;
        bw.num_states = rt.reference.num_states;
        bw.max_iters = st.em_max_iters;
        bw.num_restarts = st.em_restarts;
        bw.loglik_tol = st.em_tol;
        bw.variance_floor = st.variance_floor;
        bw.seed = derive_seed(cfg.seed, 0xB11, point, det_index);
        learned = baum_welch(rx_train, bw).first;
    }
    if (st.type == DetectorType::Nn || st.type == DetectorType::Hybrid) {
        LabeledDataset data = build_labels(channel, tx_train, rx_train, path_train,
                                           assumed_memory, assumed_levels);
        TrainOptions opts;
        opts.iterations = st.nn_iterations;
        opts.batch_size = st.nn_batch;
        opts.learning_rate = st.nn_learning_rate;
        rt.nn = train_classifier(data, rt.reference.num_states,
                                 derive_seed(cfg.seed, 0xC11, point, det_index), opts)
                    .first;
        const int k = st.gmm_components > 0 ? st.gmm_components : rt.reference.num_states;
        rt.gmm = fit_marginal(rx_train, k, derive_seed(cfg.seed, 0xD11, point, det_index));
        rt.use_nn = true;
        rt.class_prior = rt.reference.initial_dist;
    }

    switch (st.type) {
        case DetectorType::FullCsi:
            rt.detection = build_joint_trellis(channel);
            break;
        case DetectorType::Model:
            rt.detection = rt.reference;
            if (st.lik_tap_deviation > 0.0) {
                if (st.lik_taps_sampled) {
                    rt.sampled_taps = true;
                } else {
                    // Marginalize the tap noise: unit-power symbols add
                    // L * sigma_h^2 to every state variance.
                    for (auto& e : rt.detection.emissions)
                        e.variance += assumed_memory * st.lik_tap_deviation;
                }
            }
            break;
        case DetectorType::Hmm:
            rt.detection = label_learned_trellis(learned, rt.reference);
            break;
        case DetectorType::Nn:
            rt.detection = rt.reference;
            break;
        case DetectorType::Hybrid:
            rt.detection = label_learned_trellis(learned, rt.reference);
            rt.class_map = nearest_reference_states(learned, rt.reference);
            break;
    }

    if (rt.sampled_taps) {
        // Symbol history per reference state, newest first, for rebuilding
        // means from per-symbol tap draws.
        const int alphabet = static_cast<int>(channel.constellation.size());
        rt.base_taps = build_isi_profile(assumed_memory, channel.isi.decay_rate).taps;
        rt.state_symbol_values = Matrix(rt.detection.num_states, assumed_memory);
        for (int s = 0; s < rt.detection.num_states; ++s) {
            int isi = s / assumed_levels;
            for (int l = 0; l < assumed_memory; ++l) {
                rt.state_symbol_values(s, l) = channel.constellation[isi % alphabet];
                isi /= alphabet;
            }
        }
    }
    return rt;
}

inline SoftSymbolOutput detect_frame(const DetectorRuntime& rt,
                                     const std::vector<double>& rx,
                                     std::uint64_t tap_seed) {
    if (rt.use_nn)
        return nn_detect(rt.detection, rt.nn, rt.gmm, rx, rt.class_map, rt.class_prior);
    if (rt.sampled_taps) {
        const int q = rt.detection.num_states;
        const int memory = static_cast<int>(rt.state_symbol_values.cols());
        const double tap_sd = std::sqrt(rt.settings.lik_tap_deviation);
        Rng rng(tap_seed);
        Matrix lik(rx.size(), q);
        std::vector<double> taps(memory);
        for (std::size_t t = 0; t < rx.size(); ++t) {
            for (int l = 0; l < memory; ++l)
                taps[l] = rt.base_taps[l] + rng.next_normal(0.0, tap_sd);
            for (int s = 0; s < q; ++s) {
                double mean = 0.0;
                for (int l = 0; l < memory; ++l)
                    mean += taps[l] * rt.state_symbol_values(s, l);
                lik(t, s) = gaussian_pdf(rx[t], mean, rt.detection.emissions[s].variance);
            }
        }
        const PosteriorGrid grid = forward_backward_lik(rt.detection, lik, true);
        return symbol_posteriors(grid, rt.detection);
    }
    const PosteriorGrid grid = forward_backward(rt.detection, rx, true);
    return symbol_posteriors(grid, rt.detection);
}

/// One transmission shared by every detector in a trial.
struct TrialFrame {
    Frame frame;
    Interleaver interleaver;
};

inline TrialFrame make_trial_frame(const ExperimentConfig& cfg, const ChannelConfig& channel,
                                   std::size_t point, std::size_t trial) {
    TrialFrame tf;
    Rng bit_rng(derive_seed(cfg.seed, 0xE11, point, trial));
    std::vector<double> payload;
    payload.reserve(cfg.frame_symbols);
    if (cfg.coded) {
        if (cfg.frame_symbols % 2 != 0)
            throw InvalidParameter("coded frames need an even symbol count");
        const std::size_t info_len = cfg.frame_symbols / 2 - ConvCodeSpec::kMemory;
        tf.frame.info_bits.resize(info_len);
        for (auto& b : tf.frame.info_bits) b = static_cast<int>(bit_rng.next_below(2));
        tf.frame.coded_bits = conv_encode(tf.frame.info_bits);
        tf.interleaver = cfg.interleaved
                             ? Interleaver::random(tf.frame.coded_bits.size(),
                                                   derive_seed(cfg.seed, 0x111, point, trial))
                             : Interleaver::identity(tf.frame.coded_bits.size());
        const auto tx_bits = interleave(tf.frame.coded_bits, tf.interleaver);
        for (int b : tx_bits)
            payload.push_back(b == 0 ? channel.constellation.back()
                                     : channel.constellation.front());
    } else {
        tf.frame.info_bits.resize(cfg.frame_symbols);
        for (auto& b : tf.frame.info_bits) b = static_cast<int>(bit_rng.next_below(2));
        for (int b : tf.frame.info_bits)
            payload.push_back(b == 0 ? channel.constellation.back()
                                     : channel.constellation.front());
    }
    tf.frame.tx_symbols = with_guard(channel, std::move(payload));
    auto sim = simulate_frame(channel, tf.frame.tx_symbols,
                              derive_seed(cfg.seed, 0xF11, point, trial));
    tf.frame.rx = std::move(sim.first);
    tf.frame.state_path = std::move(sim.second);
    return tf;
}

/// Run one detector over one frame and count symbol and bit errors.
inline TrialCount score_frame(const ExperimentConfig& cfg, const DetectorRuntime& rt,
                              const TrialFrame& tf, std::uint64_t tap_seed) {
    const SoftSymbolOutput soft = detect_frame(rt, tf.frame.rx, tap_seed);
    const auto decisions = map_detect(soft);
    const std::size_t guard = tf.frame.tx_symbols.size() - tf.frame.rx.size();

    TrialCount count;
    for (std::size_t k = 0; k < decisions.size(); ++k)
        if (decisions[k] != tf.frame.tx_symbols[k + guard]) ++count.symbol_errors;

    if (cfg.coded) {
        const auto llrs = deinterleave(soft.llr, tf.interleaver);
        const auto decoded = soft_decode(llrs);
        for (std::size_t k = 0; k < decoded.size(); ++k)
            if (decoded[k] != tf.frame.info_bits[k]) ++count.bit_errors;
    } else {
        count.bit_errors = count.symbol_errors;
    }
    return count;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Sweep driver

/// Monte Carlo sweep over the configured dB points and detectors. Trials
/// are parallelized; every random stream is derived from (seed, point,
/// trial, purpose), so the result is identical for any `jobs`.
inline SweepResult run_sweep(const ExperimentConfig& cfg, int jobs = 1) {
    const auto start = std::chrono::steady_clock::now();
    SweepResult result;
    result.seed = cfg.seed;
    result.config_hash = config_hash(cfg);

    const std::size_t num_det = cfg.detectors.size();
    for (std::size_t p = 0; p < cfg.sweep_db.size(); ++p) {
        ChannelConfig channel = cfg.channel;
        channel.noise.total_power = db_to_noise_power(cfg.sweep_db[p]);
        try {
            std::vector<detail::DetectorRuntime> runtimes;
            runtimes.reserve(num_det);
            for (std::size_t d = 0; d < num_det; ++d)
                runtimes.push_back(detail::prepare_detector(cfg, channel, p, d));

            std::vector<std::vector<TrialCount>> counts(
                num_det, std::vector<TrialCount>(cfg.trials));
            parallel_for(cfg.trials, jobs, [&](std::size_t trial) {
                const auto tf = detail::make_trial_frame(cfg, channel, p, trial);
                for (std::size_t d = 0; d < num_det; ++d)
                    counts[d][trial] = detail::score_frame(
                        cfg, runtimes[d], tf,
                        derive_seed(cfg.seed, 0x211 + d, p, trial));
            });

            const long long symbols_per_frame = static_cast<long long>(cfg.frame_symbols);
            const long long bits_per_frame =
                cfg.coded ? static_cast<long long>(cfg.frame_symbols) / 2 -
                                ConvCodeSpec::kMemory
                          : static_cast<long long>(cfg.frame_symbols);
            for (std::size_t d = 0; d < num_det; ++d) {
                PointDetectorResult row;
                row.detector = cfg.detectors[d].name;
                row.db = cfg.sweep_db[p];
                row.trials = cfg.trials;
                row.frames = cfg.trials;
                row.per_trial = counts[d];
                for (const auto& c : counts[d]) {
                    row.symbol_errors += c.symbol_errors;
                    row.bit_errors += c.bit_errors;
                }
                row.symbols = symbols_per_frame * cfg.trials;
                row.bits = bits_per_frame * cfg.trials;
                row.ser = static_cast<double>(row.symbol_errors) / row.symbols;
                row.ber = static_cast<double>(row.bit_errors) / row.bits;
                row.stderr_ser = std::sqrt(row.ser * (1.0 - row.ser) / row.symbols);
                row.stderr_ber = std::sqrt(row.ber * (1.0 - row.ber) / row.bits);
                result.rows.push_back(std::move(row));
            }
        } catch (const std::exception& ex) {
            std::ostringstream msg;
            msg << "point " << cfg.sweep_db[p] << " dB failed: " << ex.what();
            result.point_errors.push_back(msg.str());
        }
    }
    result.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return result;
}

// ---------------------------------------------------------------------------
// CSV and metadata output

inline void emit_csv(const SweepResult& result, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InvalidInput("cannot write " + path);
    out << "detector,db,trials,frames,symbol_errors,bit_errors,ser,ber,"
           "stderr_ser,stderr_ber,note\n";
    char buf[512];
    for (const auto& row : result.rows) {
        std::string note;
        if (row.bit_errors == 0 && row.bits > 0) {
            std::snprintf(buf, sizeof(buf), "ber_rule_of_three_upper=%.6g",
                          3.0 / static_cast<double>(row.bits));
            note = buf;
        }
        std::snprintf(buf, sizeof(buf),
                      "%s,%.17g,%ld,%ld,%lld,%lld,%.17g,%.17g,%.17g,%.17g,%s\n",
                      row.detector.c_str(), row.db, row.trials, row.frames,
                      row.symbol_errors, row.bit_errors, row.ser, row.ber,
                      row.stderr_ser, row.stderr_ber, note.c_str());
        out << buf;
    }
}

inline SweepResult parse_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidInput("cannot read " + path);
    SweepResult result;
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, ',')) fields.push_back(field);
        fields.resize(11);
        PointDetectorResult row;
        row.detector = fields[0];
        row.db = std::stod(fields[1]);
        row.trials = std::stol(fields[2]);
        row.frames = std::stol(fields[3]);
        row.symbol_errors = std::stoll(fields[4]);
        row.bit_errors = std::stoll(fields[5]);
        row.ser = std::stod(fields[6]);
        row.ber = std::stod(fields[7]);
        row.stderr_ser = std::stod(fields[8]);
        row.stderr_ber = std::stod(fields[9]);
        result.rows.push_back(std::move(row));
    }
    return result;
}

inline nlohmann::json run_metadata(const ExperimentConfig& cfg, const SweepResult& result) {
    nlohmann::json j;
    j["version"] = kVersion;
    j["config_hash"] = result.config_hash;
    j["seed"] = result.seed;
    j["wall_seconds"] = result.wall_seconds;
    j["errors"] = result.point_errors;
    j["config"] = to_json(cfg);
    return j;
}

}  // namespace bcjrsim
