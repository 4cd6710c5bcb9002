#pragma once

#include <cctype>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "pulsesoc/cell.hpp"

namespace pulsesoc {

struct CellConfig {
    CellParams cell;
    AgingParams aging;
};

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

inline double parse_double(const std::string& text, const std::string& key,
                           int line_no) {
    std::size_t pos = 0;
    double v = 0.0;
    try {
        v = std::stod(text, &pos);
    } catch (const std::exception&) {
        pos = 0;
    }
    if (pos != text.size())
        throw std::runtime_error("config line " + std::to_string(line_no) +
                                 ": value of '" + key + "' is not a number: '" +
                                 text + "'");
    return v;
}

} // namespace detail

// OCV breakpoint table: CSV lines "soc,volts", strictly increasing soc,
// covering 0..1. '#' starts a comment.
inline OcvCurve load_ocv_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open OCV table: " + path);
    std::vector<std::pair<double, double>> pts;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        auto comma = line.find(',');
        if (comma == std::string::npos)
            throw std::runtime_error(path + " line " + std::to_string(line_no) +
                                     ": expected 'soc,volts'");
        double s = detail::parse_double(detail::trim(line.substr(0, comma)),
                                        "soc", line_no);
        double v = detail::parse_double(detail::trim(line.substr(comma + 1)),
                                        "volts", line_no);
        pts.emplace_back(s, v);
    }
    return OcvCurve::from_table(std::move(pts));
}

// Cell configuration file: one "key = value" per line, '#' comments.
// Unknown keys are an error so typos do not silently fall back to defaults.
// Schema and defaults are documented in docs/config_reference.md.
inline CellConfig load_cell_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config: " + path);

    CellConfig cfg;
    std::map<int, RcPair> rc;  // index -> pair, so rc pairs can come in any order
    bool ocv_params_touched = false;
    double v_plateau = 3.45, ramp_end = 0.05, plateau_end = 0.40;
    std::string ocv_table_path;

    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;

        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("config line " + std::to_string(line_no) +
                                     ": expected 'key = value'");
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        if (key.empty() || value.empty())
            throw std::runtime_error("config line " + std::to_string(line_no) +
                                     ": empty key or value");

        auto num = [&]() { return detail::parse_double(value, key, line_no); };

        if (key == "capacity_ah") cfg.cell.capacity_ah = num();
        else if (key == "r0_ohm") cfg.cell.r0_ohm = num();
        else if (key == "eta_charge") cfg.cell.eta_charge = num();
        else if (key == "eta_discharge") cfg.cell.eta_discharge = num();
        else if (key == "v_max") { cfg.cell.v_max = num(); ocv_params_touched = true; }
        else if (key == "v_min") { cfg.cell.v_min = num(); ocv_params_touched = true; }
        else if (key == "i_cutoff_a") cfg.cell.i_cutoff_a = num();
        else if (key == "i_max_charge_a") cfg.cell.i_max_charge_a = num();
        else if (key == "i_max_discharge_a") cfg.cell.i_max_discharge_a = num();
        else if (key == "r_soc_slope") cfg.cell.r_soc_slope = num();
        else if (key == "ocv_plateau_v") { v_plateau = num(); ocv_params_touched = true; }
        else if (key == "ocv_ramp_end") { ramp_end = num(); ocv_params_touched = true; }
        else if (key == "ocv_plateau_end") { plateau_end = num(); ocv_params_touched = true; }
        else if (key == "ocv_table") ocv_table_path = value;
        else if (key == "fade_per_fce") cfg.aging.fade_per_fce = num();
        else if (key == "r0_growth_per_fce") cfg.aging.r0_growth_per_fce = num();
        else if (key.rfind("rc", 0) == 0) {
            // rcN_r_ohm / rcN_c_f
            auto us = key.find('_');
            if (us == std::string::npos || us == 2)
                throw std::runtime_error("config line " + std::to_string(line_no) +
                                         ": unknown key '" + key + "'");
            int idx = 0;
            try {
                idx = std::stoi(key.substr(2, us - 2));
            } catch (const std::exception&) {
                throw std::runtime_error("config line " + std::to_string(line_no) +
                                         ": unknown key '" + key + "'");
            }
            const std::string field = key.substr(us + 1);
            if (field == "r_ohm") rc[idx].r_ohm = num();
            else if (field == "c_f") rc[idx].c_f = num();
            else
                throw std::runtime_error("config line " + std::to_string(line_no) +
                                         ": unknown key '" + key + "'");
        } else {
            throw std::runtime_error("config line " + std::to_string(line_no) +
                                     ": unknown key '" + key + "'");
        }
    }

    if (!rc.empty()) {
        cfg.cell.rc_pairs.clear();
        int expected = 1;
        for (const auto& [idx, pair] : rc) {
            if (idx != expected)
                throw std::runtime_error("config: rc pair indices must be 1..N, got rc" +
                                         std::to_string(idx));
            if (!(pair.r_ohm > 0) || !(pair.c_f > 0))
                throw std::runtime_error("config: rc" + std::to_string(idx) +
                                         " needs both r_ohm > 0 and c_f > 0");
            cfg.cell.rc_pairs.push_back(pair);
            ++expected;
        }
    }

    if (!ocv_table_path.empty()) {
        cfg.cell.ocv_curve = load_ocv_table(ocv_table_path);
    } else if (ocv_params_touched) {
        cfg.cell.ocv_curve = OcvCurve::default_curve(cfg.cell.v_min, v_plateau,
                                                     cfg.cell.v_max, ramp_end,
                                                     plateau_end);
    }

    cfg.cell.validate();
    cfg.aging.validate();
    return cfg;
}

} // namespace pulsesoc
