#pragma once

#include <fstream>
#include <string>

#include <json.hpp>

#include "pulsesoc/dataset.hpp"
#include "pulsesoc/network.hpp"

namespace pulsesoc {

// A trained network bundled with the feature encoding it expects, so a model
// file is enough to run inference.
struct SocModel {
    Network net;
    FeatureConfig feature_config;

    double predict(std::span<const double> features) const {
        return net.forward(features);
    }
};

inline nlohmann::json to_json(const SocModel& model) {
    const auto& sizes = model.net.layer_sizes();
    nlohmann::json weights = nlohmann::json::array();
    nlohmann::json biases = nlohmann::json::array();
    for (std::size_t l = 0; l < model.net.num_layers(); ++l) {
        const std::size_t n_in = sizes[l];
        const std::size_t n_out = sizes[l + 1];
        nlohmann::json rows = nlohmann::json::array();
        for (std::size_t j = 0; j < n_out; ++j) {
            nlohmann::json row = nlohmann::json::array();
            for (std::size_t k = 0; k < n_in; ++k)
                row.push_back(model.net.weights()[l][j * n_in + k]);
            rows.push_back(std::move(row));
        }
        weights.push_back(std::move(rows));
        biases.push_back(model.net.biases()[l]);
    }
    return nlohmann::json{
        {"schema", "pulsesoc.model"},
        {"version", 1},
        {"layer_sizes", sizes},
        {"activation", "relu"},
        {"weights", weights},
        {"biases", biases},
        {"feature_config", to_json(model.feature_config)},
        {"normalization",
         {{"v_lo", model.feature_config.v_lo}, {"v_hi", model.feature_config.v_hi}}}};
}

inline SocModel model_from_json(const nlohmann::json& j) {
    if (j.value("schema", "") != "pulsesoc.model")
        throw std::runtime_error("model: unexpected schema");
    if (j.value("version", 0) != 1)
        throw std::runtime_error("model: unsupported version");

    const auto sizes = j.at("layer_sizes").get<std::vector<std::size_t>>();
    Network net = Network::init(sizes, 0);

    const auto& weights = j.at("weights");
    const auto& biases = j.at("biases");
    if (weights.size() != sizes.size() - 1 || biases.size() != sizes.size() - 1)
        throw std::runtime_error("model: layer count mismatch");
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        const std::size_t n_in = sizes[l];
        const std::size_t n_out = sizes[l + 1];
        const auto& rows = weights[l];
        if (rows.size() != n_out)
            throw std::runtime_error("model: weight rows mismatch in layer " +
                                     std::to_string(l));
        for (std::size_t r = 0; r < n_out; ++r) {
            const auto row = rows[r].get<std::vector<double>>();
            if (row.size() != n_in)
                throw std::runtime_error("model: weight cols mismatch in layer " +
                                         std::to_string(l));
            for (std::size_t k = 0; k < n_in; ++k)
                net.weights()[l][r * n_in + k] = row[k];
        }
        const auto b = biases[l].get<std::vector<double>>();
        if (b.size() != n_out)
            throw std::runtime_error("model: bias size mismatch in layer " +
                                     std::to_string(l));
        net.biases()[l] = b;
    }
    if (!net.finite()) throw std::runtime_error("model: non-finite parameters");

    SocModel model{std::move(net), feature_config_from_json(j.at("feature_config"))};
    if (model.feature_config.feature_length() != sizes.front())
        throw std::runtime_error("model: feature config does not match input width");
    return model;
}

inline void save_model(const SocModel& model, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for write: " + path);
    out << to_json(model).dump(2) << '\n';
}

inline SocModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open: " + path);
    nlohmann::json j;
    in >> j;
    return model_from_json(j);
}

} // namespace pulsesoc
