#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "bcjrsim/channel.hpp"
#include "bcjrsim/common.hpp"
#include "bcjrsim/nn.hpp"
#include "bcjrsim/trellis.hpp"

namespace bcjrsim {

inline constexpr int kModelFormatVersion = 1;

inline nlohmann::json to_json(const TrellisSpec& trellis) {
    nlohmann::json j;
    j["format"] = "trellis";
    j["version"] = kModelFormatVersion;
    j["num_states"] = trellis.num_states;
    j["constellation"] = trellis.constellation;
    j["state_symbol"] = trellis.state_symbol;
    j["initial_dist"] = trellis.initial_dist;
    std::vector<double> means, variances;
    for (const auto& e : trellis.emissions) {
        means.push_back(e.mean);
        variances.push_back(e.variance);
    }
    j["means"] = means;
    j["variances"] = variances;
    std::vector<std::vector<double>> rows(trellis.num_states);
    for (int i = 0; i < trellis.num_states; ++i)
        rows[i].assign(trellis.transitions.row(i), trellis.transitions.row(i) + trellis.num_states);
    j["transitions"] = rows;
    return j;
}

inline TrellisSpec trellis_from_json(const nlohmann::json& j) {
    if (j.value("format", "") != "trellis")
        throw InvalidInput("not a trellis model file");
    TrellisSpec trellis;
    trellis.num_states = j.at("num_states").get<int>();
    trellis.constellation = j.at("constellation").get<std::vector<double>>();
    trellis.state_symbol = j.at("state_symbol").get<std::vector<int>>();
    trellis.initial_dist = j.at("initial_dist").get<std::vector<double>>();
    const auto means = j.at("means").get<std::vector<double>>();
    const auto variances = j.at("variances").get<std::vector<double>>();
    trellis.emissions.resize(trellis.num_states);
    for (int s = 0; s < trellis.num_states; ++s)
        trellis.emissions[s] = {means.at(s), variances.at(s)};
    const auto rows = j.at("transitions").get<std::vector<std::vector<double>>>();
    trellis.transitions = Matrix(trellis.num_states, trellis.num_states);
    for (int i = 0; i < trellis.num_states; ++i)
        for (int jj = 0; jj < trellis.num_states; ++jj)
            trellis.transitions(i, jj) = rows.at(i).at(jj);
    return trellis;
}

inline nlohmann::json to_json(const NnParams& nn) {
    nlohmann::json j;
    j["format"] = "nn";
    j["version"] = kModelFormatVersion;
    j["num_classes"] = nn.num_classes;
    j["hidden"] = {NnParams::kHidden1, NnParams::kHidden2};
    j["theta"] = nn.theta;
    return j;
}

inline NnParams nn_from_json(const nlohmann::json& j) {
    if (j.value("format", "") != "nn") throw InvalidInput("not an nn model file");
    NnParams nn;
    nn.num_classes = j.at("num_classes").get<int>();
    nn.theta = j.at("theta").get<std::vector<double>>();
    if (nn.theta.size() != NnParams::param_count(nn.num_classes))
        throw InvalidInput("nn parameter vector has the wrong size");
    return nn;
}

inline nlohmann::json to_json(const GmmMarginal& gmm) {
    nlohmann::json j;
    j["format"] = "gmm";
    j["version"] = kModelFormatVersion;
    j["weights"] = gmm.weights;
    j["means"] = gmm.means;
    j["variances"] = gmm.variances;
    return j;
}

inline GmmMarginal gmm_from_json(const nlohmann::json& j) {
    if (j.value("format", "") != "gmm") throw InvalidInput("not a gmm model file");
    GmmMarginal gmm;
    gmm.weights = j.at("weights").get<std::vector<double>>();
    gmm.means = j.at("means").get<std::vector<double>>();
    gmm.variances = j.at("variances").get<std::vector<double>>();
    return gmm;
}

inline void save_json(const nlohmann::json& j, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw InvalidInput("cannot write " + path);
    out << j.dump(2) << '\n';
}

inline nlohmann::json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidInput("cannot read " + path);
    nlohmann::json j;
    in >> j;
    return j;
}

/// Table-II-style text report: emission parameters and transition matrix
/// rounded to 2 decimals, steady-state distribution to 3.
inline std::string report_model(const TrellisSpec& trellis) {
    const auto pi = stationary_distribution(trellis.transitions);
    std::ostringstream out;
    char buf[64];
    auto fmt = [&](double v, const char* spec) {
        std::snprintf(buf, sizeof(buf), spec, v);
        return std::string(buf);
    };
    out << "states: " << trellis.num_states << "\n";
    out << "mu:    ";
    for (const auto& e : trellis.emissions) out << ' ' << fmt(e.mean, "%7.2f");
    out << "\nsigma2:";
    for (const auto& e : trellis.emissions) out << ' ' << fmt(e.variance, "%7.4g");
    out << "\ntransitions:\n";
    for (int i = 0; i < trellis.num_states; ++i) {
        out << " ";
        for (int j = 0; j < trellis.num_states; ++j)
            out << ' ' << fmt(trellis.transitions(i, j), "%5.2f");
        out << "\n";
    }
    out << "pi:    ";
    for (double p : pi) out << ' ' << fmt(p, "%6.3f");
    out << "\n";
    return out.str();
}

}  // namespace bcjrsim
