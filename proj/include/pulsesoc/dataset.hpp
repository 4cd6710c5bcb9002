#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include <json.hpp>

#include "pulsesoc/cell.hpp"
#include "pulsesoc/execution.hpp"
#include "pulsesoc/random.hpp"
#include "pulsesoc/schedule.hpp"

namespace pulsesoc {

// What goes into one feature vector: which pulse-block segments, at what
// resampling rate, and the voltage normalization window. `ocv_only` is the
// degenerate amplitude-0 encoding: a single rested-voltage feature with no
// amplitude term.
struct FeatureConfig {
    double charge_pulse_s = 60.0;
    double inter_rest_s = 60.0;
    double discharge_pulse_s = 60.0;
    bool use_charge = true;
    bool use_rest = true;
    bool use_discharge = true;
    double feature_rate_hz = 1.0;
    bool include_amplitude = true;
    double v_lo = 2.5;
    double v_hi = 4.2;
    bool ocv_only = false;

    void validate() const {
        if (!(v_lo < v_hi)) throw std::invalid_argument("FeatureConfig: v_lo must be < v_hi");
        if (ocv_only) return;
        if (!(feature_rate_hz > 0))
            throw std::invalid_argument("FeatureConfig: feature_rate_hz must be > 0");
        for (double dur : {charge_pulse_s, inter_rest_s, discharge_pulse_s}) {
            const double n = dur * feature_rate_hz;
            if (std::abs(n - std::round(n)) > 1e-9)
                throw std::invalid_argument(
                    "FeatureConfig: feature_rate_hz must divide segment durations evenly");
        }
        if (!(use_charge || use_rest || use_discharge))
            throw std::invalid_argument("FeatureConfig: no segments selected");
    }

    std::size_t segment_count(double duration_s) const {
        return static_cast<std::size_t>(std::llround(duration_s * feature_rate_hz));
    }

    std::size_t feature_length() const {
        if (ocv_only) return 1;
        std::size_t n = 0;
        if (use_charge) n += segment_count(charge_pulse_s);
        if (use_rest) n += segment_count(inter_rest_s);
        if (use_discharge) n += segment_count(discharge_pulse_s);
        return n + (include_amplitude ? 1 : 0);
    }

    // Count of leading voltage-derived features (everything except the
    // appended amplitude scalar).
    std::size_t voltage_feature_count() const {
        return feature_length() - ((include_amplitude && !ocv_only) ? 1 : 0);
    }

    double normalize(double volts) const { return (volts - v_lo) / (v_hi - v_lo); }

    bool operator==(const FeatureConfig&) const = default;
};

struct SampleMeta {
    std::string cell_id = "sim";
    double capacity_ah = 0.0;
    double pulse_c_rate = 0.0;
    double breakpoint = 0.0;
};

struct PulseSample {
    std::vector<double> features;
    double soc_label = 0.0;
    SampleMeta meta;
};

struct Dataset {
    FeatureConfig config;
    std::vector<PulseSample> samples;

    std::size_t size() const { return samples.size(); }
};

// Normalize a voltage window into a feature vector, appending the amplitude
// term (C-rate over 2) when configured.
inline std::vector<double> featurize(const std::vector<double>& voltage_window,
                                     double amplitude_c, const FeatureConfig& cfg) {
    const std::size_t expected = cfg.voltage_feature_count();
    if (voltage_window.size() != expected)
        throw std::invalid_argument("featurize: window length " +
                                    std::to_string(voltage_window.size()) +
                                    " != expected " + std::to_string(expected));
    std::vector<double> out;
    out.reserve(cfg.feature_length());
    for (double v : voltage_window) {
        if (!std::isfinite(v)) throw std::invalid_argument("featurize: non-finite voltage");
        out.push_back(cfg.normalize(v));
    }
    if (cfg.include_amplitude && !cfg.ocv_only) out.push_back(amplitude_c / 2.0);
    return out;
}

struct ExtractResult {
    std::vector<PulseSample> samples;
    std::size_t skipped = 0;  // truncated pulse blocks
};

// Pull one labeled sample per pulse block out of a phase log. A block is
// the label triple pulse_<tag>_charge / _rest / _discharge emitted by the
// schedule builders; the SoC label is the true SoC at the first sample of
// the charge pulse. Blocks cut short by a cutoff abort are skipped.
inline ExtractResult extract_pulses(const PhaseLog& log, const FeatureConfig& cfg,
                                    double capacity_ah,
                                    const std::string& cell_id = "sim") {
    cfg.validate();
    if (cfg.ocv_only)
        throw std::invalid_argument("extract_pulses: ocv_only config has no pulse window");
    const double dt = log.sample_dt();
    const double stride_f = 1.0 / (cfg.feature_rate_hz * dt);
    const std::size_t stride = static_cast<std::size_t>(std::llround(stride_f));
    if (std::abs(stride_f - static_cast<double>(stride)) > 1e-9 || stride == 0)
        throw std::invalid_argument(
            "extract_pulses: feature rate must be an integer stride of the log rate");

    ExtractResult res;
    const auto runs = log.runs();
    for (std::size_t i = 0; i < runs.size(); ++i) {
        const std::string& lbl = runs[i].label;
        if (lbl.rfind("pulse_", 0) != 0) continue;
        if (lbl.size() < 7 || lbl.substr(lbl.size() - 7) != "_charge") continue;
        const std::string stem = lbl.substr(0, lbl.size() - 7);

        if (i + 2 >= runs.size() || runs[i + 1].label != stem + "_rest" ||
            runs[i + 2].label != stem + "_discharge") {
            ++res.skipped;
            continue;
        }

        const std::size_t need_charge = cfg.segment_count(cfg.charge_pulse_s);
        const std::size_t need_rest = cfg.segment_count(cfg.inter_rest_s);
        const std::size_t need_dis = cfg.segment_count(cfg.discharge_pulse_s);
        const auto run_len = [&](const PhaseLog::Run& r) { return r.end - r.begin; };
        if (run_len(runs[i]) < (need_charge - 1) * stride + 1 ||
            run_len(runs[i + 1]) < (need_rest - 1) * stride + 1 ||
            run_len(runs[i + 2]) < (need_dis - 1) * stride + 1) {
            ++res.skipped;
            continue;
        }

        std::vector<double> window;
        auto slice = [&](const PhaseLog::Run& r, std::size_t count) {
            for (std::size_t k = 0; k < count; ++k)
                window.push_back(log.voltage_v(r.begin + k * stride));
        };
        if (cfg.use_charge) slice(runs[i], need_charge);
        if (cfg.use_rest) slice(runs[i + 1], need_rest);
        if (cfg.use_discharge) slice(runs[i + 2], need_dis);

        const double amp_c =
            capacity_ah > 0 ? std::abs(log.current_a(runs[i].begin)) / capacity_ah : 0.0;

        PulseSample s;
        s.features = featurize(window, amp_c, cfg);
        s.soc_label = log.soc_true(runs[i].begin);
        s.meta.cell_id = cell_id;
        s.meta.capacity_ah = capacity_ah;
        s.meta.pulse_c_rate = amp_c;
        // requested breakpoint is encoded in the label tag, e.g. pulse_90_charge
        try {
            s.meta.breakpoint = std::stod(stem.substr(6)) / 100.0;
        } catch (const std::exception&) {
            s.meta.breakpoint = s.soc_label;
        }
        res.samples.push_back(std::move(s));
    }
    return res;
}

// Gaussian sensor noise on the voltage-derived features only; the amplitude
// term is a command, not a measurement. Deterministic per seed.
inline void add_noise(Dataset& ds, double sigma_v, std::uint64_t seed) {
    if (!(sigma_v >= 0)) throw std::invalid_argument("add_noise: sigma_v must be >= 0");
    if (sigma_v == 0.0) return;
    const double sigma_n = sigma_v / (ds.config.v_hi - ds.config.v_lo);
    Rng rng(seed);
    const std::size_t nv = ds.config.voltage_feature_count();
    for (PulseSample& s : ds.samples)
        for (std::size_t i = 0; i < nv && i < s.features.size(); ++i)
            s.features[i] += sigma_n * rng.gaussian();
}

// Deterministic shuffled split. Both sides keep their original relative
// order and share no sample.
inline std::pair<Dataset, Dataset> split(const Dataset& ds, double val_fraction,
                                         std::uint64_t seed) {
    if (!(val_fraction > 0.0 && val_fraction < 1.0))
        throw std::invalid_argument("split: val_fraction must be in (0,1)");
    const std::size_t n = ds.samples.size();
    if (n < 2) throw std::invalid_argument("split: need at least 2 samples");

    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(seed);
    for (std::size_t i = n - 1; i > 0; --i)
        std::swap(idx[i], idx[rng.index(i + 1)]);

    std::size_t n_val = static_cast<std::size_t>(std::llround(val_fraction * n));
    n_val = std::clamp<std::size_t>(n_val, 1, n - 1);

    std::vector<std::size_t> val_idx(idx.begin(), idx.begin() + n_val);
    std::vector<std::size_t> train_idx(idx.begin() + n_val, idx.end());
    std::sort(val_idx.begin(), val_idx.end());
    std::sort(train_idx.begin(), train_idx.end());

    Dataset train{ds.config, {}}, val{ds.config, {}};
    for (std::size_t i : train_idx) train.samples.push_back(ds.samples[i]);
    for (std::size_t i : val_idx) val.samples.push_back(ds.samples[i]);
    return {std::move(train), std::move(val)};
}

// Default simulation grid: 161 uniform SoC points across [0.10, 0.90]
// (0.5% spacing), which already contains the 10% lab breakpoints.
inline std::vector<double> dense_default_grid() {
    std::vector<double> g;
    g.reserve(161);
    for (int k = 0; k <= 160; ++k) g.push_back((100.0 + 5.0 * k) / 1000.0);
    return g;
}

// Simulated corpus: for each (soc, amplitude) the cell is initialized fully
// rested at that soc and a single pulse block is executed and featurized.
// Amplitude 0 is the OCV baseline: a one-feature sample of the rested
// voltage. It cannot be mixed with nonzero amplitudes in one corpus because
// the feature length would differ.
inline Dataset dense_corpus(const CellParams& params,
                            const std::vector<double>& amplitudes_c,
                            const std::vector<double>& soc_grid,
                            double noise_sigma_v, std::uint64_t seed,
                            FeatureConfig cfg = {}, double sample_dt = 0.1) {
    if (amplitudes_c.empty()) throw std::invalid_argument("dense_corpus: no amplitudes");
    const bool has_zero =
        std::any_of(amplitudes_c.begin(), amplitudes_c.end(),
                    [](double a) { return a == 0.0; });
    if (has_zero && amplitudes_c.size() > 1)
        throw std::invalid_argument(
            "dense_corpus: amplitude 0 cannot be mixed with pulsed amplitudes");
    for (double a : amplitudes_c)
        if (a < 0) throw std::invalid_argument("dense_corpus: negative amplitude");
    for (double s : soc_grid)
        if (!(s > 0.0 && s < 1.0))
            throw std::invalid_argument("dense_corpus: grid soc must be in (0,1)");

    cfg.ocv_only = has_zero;
    cfg.validate();

    Dataset ds;
    ds.config = cfg;

    ExecutionOptions exec;
    exec.sample_dt = sample_dt;
    for (double soc : soc_grid) {
        for (double amp : amplitudes_c) {
            CellState state = CellState::rested(soc, params);
            if (amp == 0.0) {
                PulseSample s;
                s.features = {cfg.normalize(terminal_voltage(state, params, 0.0))};
                s.soc_label = soc;
                s.meta.capacity_ah = params.capacity_ah;
                s.meta.pulse_c_rate = 0.0;
                s.meta.breakpoint = soc;
                ds.samples.push_back(std::move(s));
                continue;
            }
            const double i_pulse = amp * params.capacity_ah;
            Schedule sch;
            sch.name = "pulse-block";
            sch.steps.push_back(Step::cc(
                i_pulse, {{Terminator::Kind::ElapsedAtLeast, cfg.charge_pulse_s}},
                pulse_block_label(soc, "charge")));
            sch.steps.push_back(
                Step::rest(cfg.inter_rest_s, pulse_block_label(soc, "rest")));
            sch.steps.push_back(Step::cc(
                -i_pulse, {{Terminator::Kind::ElapsedAtLeast, cfg.discharge_pulse_s}},
                pulse_block_label(soc, "discharge")));
            auto res = execute(sch, params, state, exec);
            auto extracted = extract_pulses(res.log, cfg, params.capacity_ah);
            if (extracted.samples.size() != 1)
                throw std::runtime_error("dense_corpus: pulse block extraction failed");
            ds.samples.push_back(std::move(extracted.samples.front()));
        }
    }
    add_noise(ds, noise_sigma_v, derive_seed(seed, 0));
    return ds;
}

// ---- JSON-lines serialization (docs/file_formats.md) ----

inline nlohmann::json to_json(const FeatureConfig& cfg) {
    return {{"charge_pulse_s", cfg.charge_pulse_s},
            {"inter_rest_s", cfg.inter_rest_s},
            {"discharge_pulse_s", cfg.discharge_pulse_s},
            {"use_charge", cfg.use_charge},
            {"use_rest", cfg.use_rest},
            {"use_discharge", cfg.use_discharge},
            {"feature_rate_hz", cfg.feature_rate_hz},
            {"include_amplitude", cfg.include_amplitude},
            {"v_lo", cfg.v_lo},
            {"v_hi", cfg.v_hi},
            {"ocv_only", cfg.ocv_only}};
}

inline FeatureConfig feature_config_from_json(const nlohmann::json& j) {
    FeatureConfig cfg;
    cfg.charge_pulse_s = j.at("charge_pulse_s").get<double>();
    cfg.inter_rest_s = j.at("inter_rest_s").get<double>();
    cfg.discharge_pulse_s = j.at("discharge_pulse_s").get<double>();
    cfg.use_charge = j.at("use_charge").get<bool>();
    cfg.use_rest = j.at("use_rest").get<bool>();
    cfg.use_discharge = j.at("use_discharge").get<bool>();
    cfg.feature_rate_hz = j.at("feature_rate_hz").get<double>();
    cfg.include_amplitude = j.at("include_amplitude").get<bool>();
    cfg.v_lo = j.at("v_lo").get<double>();
    cfg.v_hi = j.at("v_hi").get<double>();
    cfg.ocv_only = j.value("ocv_only", false);
    cfg.validate();
    return cfg;
}

inline void write_dataset_jsonl(const Dataset& ds, std::ostream& out) {
    nlohmann::json header{{"schema", "pulsesoc.dataset"},
                          {"version", 1},
                          {"feature_config", to_json(ds.config)}};
    out << header.dump() << '\n';
    for (const PulseSample& s : ds.samples) {
        nlohmann::json j{{"features", s.features},
                         {"soc", s.soc_label},
                         {"meta",
                          {{"cell_id", s.meta.cell_id},
                           {"capacity_ah", s.meta.capacity_ah},
                           {"pulse_c_rate", s.meta.pulse_c_rate},
                           {"breakpoint", s.meta.breakpoint}}}};
        out << j.dump() << '\n';
    }
}

inline void write_dataset_jsonl(const Dataset& ds, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for write: " + path);
    write_dataset_jsonl(ds, out);
}

inline Dataset read_dataset_jsonl(std::istream& in) {
    std::string line;
    if (!std::getline(in, line))
        throw std::runtime_error("dataset: empty input");
    nlohmann::json header = nlohmann::json::parse(line);
    if (header.value("schema", "") != "pulsesoc.dataset")
        throw std::runtime_error("dataset: unexpected schema");
    if (header.value("version", 0) != 1)
        throw std::runtime_error("dataset: unsupported version");

    Dataset ds;
    ds.config = feature_config_from_json(header.at("feature_config"));
    const std::size_t want = ds.config.feature_length();
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line);
        PulseSample s;
        s.features = j.at("features").get<std::vector<double>>();
        if (s.features.size() != want)
            throw std::runtime_error("dataset: sample feature length mismatch");
        s.soc_label = j.at("soc").get<double>();
        const auto& m = j.at("meta");
        s.meta.cell_id = m.value("cell_id", "sim");
        s.meta.capacity_ah = m.value("capacity_ah", 0.0);
        s.meta.pulse_c_rate = m.value("pulse_c_rate", 0.0);
        s.meta.breakpoint = m.value("breakpoint", 0.0);
        ds.samples.push_back(std::move(s));
    }
    return ds;
}

inline Dataset read_dataset_jsonl_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open: " + path);
    return read_dataset_jsonl(in);
}

} // namespace pulsesoc
