#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <fstream>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "pulsesoc/cell.hpp"
#include "pulsesoc/dataset.hpp"
#include "pulsesoc/model_io.hpp"
#include "pulsesoc/random.hpp"

namespace pulsesoc {

// Imperfect sensing used by the runtime estimator: biased/noisy current,
// noisy voltage, and a possibly stale capacity belief.
struct SensorModel {
    double current_bias_a = 0.0;
    double current_noise_sigma_a = 0.0;
    double voltage_noise_sigma_v = 0.0;
    double capacity_assumed_ah = 3.0;

    void validate() const {
        if (current_noise_sigma_a < 0 || voltage_noise_sigma_v < 0)
            throw std::invalid_argument("SensorModel: sigmas must be >= 0");
        if (!(capacity_assumed_ah > 0))
            throw std::invalid_argument("SensorModel: capacity must be > 0");
    }
};

// One discrete coulomb-counting update on measured current, clamped to [0,1].
inline double coulomb_step(double soc_est, double measured_current_a, double dt_s,
                           double capacity_assumed_ah, double eta) {
    if (!(dt_s > 0)) throw std::invalid_argument("coulomb_step: dt_s must be > 0");
    if (!(capacity_assumed_ah > 0))
        throw std::invalid_argument("coulomb_step: capacity must be > 0");
    const double next =
        soc_est + eta * measured_current_a * dt_s / (3600.0 * capacity_assumed_ah);
    return std::clamp(next, 0.0, 1.0);
}

// Demanded pack current over time plus the stop intervals derived from it.
struct DriveProfile {
    double dt_s = 0.1;
    std::vector<double> current_a;

    double duration_s() const { return static_cast<double>(current_a.size()) * dt_s; }

    struct Stop {
        std::size_t begin = 0;  // sample index
        std::size_t end = 0;    // one past last
        double duration_s = 0.0;
    };

    // Maximal zero-current runs at least min_stop_s long.
    std::vector<Stop> stops(double min_stop_s) const {
        std::vector<Stop> out;
        for (std::size_t i = 0; i < current_a.size();) {
            if (current_a[i] != 0.0) { ++i; continue; }
            std::size_t j = i;
            while (j < current_a.size() && current_a[j] == 0.0) ++j;
            const double dur = static_cast<double>(j - i) * dt_s;
            if (dur >= min_stop_s) out.push_back({i, j, dur});
            i = j;
        }
        return out;
    }
};

// Knobs for the synthetic stop-and-go generator.
struct DriveStyle {
    double accel_s_lo = 5.0, accel_s_hi = 15.0;
    double accel_peak_c_lo = 1.2, accel_peak_c_hi = 2.5;
    double cruise_s_lo = 20.0, cruise_s_hi = 90.0;
    double cruise_c_lo = 0.2, cruise_c_hi = 0.8;
    double regen_s_lo = 3.0, regen_s_hi = 10.0;
    double regen_c_lo = 0.3, regen_c_hi = 0.8;
    double stop_s_lo = 20.0, stop_s_hi = 90.0;
    double dt_s = 0.1;
};

// Seeded accel / cruise / regen / stop cycles. Net current is discharge-
// heavy and everything stays inside the cell's current ratings.
inline DriveProfile generate_drive_profile(std::uint64_t seed, double duration_s,
                                           const CellParams& params,
                                           const DriveStyle& style = {}) {
    if (!(duration_s > 0))
        throw std::invalid_argument("generate_drive_profile: duration must be > 0");
    Rng rng(seed);
    DriveProfile prof;
    prof.dt_s = style.dt_s;
    const std::size_t total = static_cast<std::size_t>(std::llround(duration_s / style.dt_s));
    prof.current_a.reserve(total);

    const double dis_cap = 0.8 * params.i_max_discharge_a;
    const double chg_cap = 0.8 * params.i_max_charge_a;

    auto emit = [&](double seconds, auto&& current_at) {
        const std::size_t n = static_cast<std::size_t>(std::llround(seconds / style.dt_s));
        for (std::size_t k = 0; k < n && prof.current_a.size() < total; ++k)
            prof.current_a.push_back(current_at(static_cast<double>(k) /
                                                std::max<double>(1.0, static_cast<double>(n))));
    };

    while (prof.current_a.size() < total) {
        const double accel_s = rng.uniform(style.accel_s_lo, style.accel_s_hi);
        const double peak = std::min(
            dis_cap, rng.uniform(style.accel_peak_c_lo, style.accel_peak_c_hi) *
                         params.capacity_ah);
        emit(accel_s, [&](double frac) { return -peak * frac; });

        const double cruise_s = rng.uniform(style.cruise_s_lo, style.cruise_s_hi);
        const double cruise = std::min(
            dis_cap,
            rng.uniform(style.cruise_c_lo, style.cruise_c_hi) * params.capacity_ah);
        emit(cruise_s, [&](double) { return -cruise; });

        const double regen_s = rng.uniform(style.regen_s_lo, style.regen_s_hi);
        const double regen = std::min(
            chg_cap, rng.uniform(style.regen_c_lo, style.regen_c_hi) * params.capacity_ah);
        emit(regen_s, [&](double) { return regen; });

        const double stop_s = rng.uniform(style.stop_s_lo, style.stop_s_hi);
        emit(stop_s, [&](double) { return 0.0; });
    }
    return prof;
}

enum class EstimatorMode : std::uint8_t { Coulomb, Reset };

struct ResetEvent {
    double t_s = 0.0;
    double pre_estimate = 0.0;
    double post_estimate = 0.0;
    double soc_true = 0.0;
};

struct EstimatorTrace {
    double dt_s = 0.1;
    std::vector<double> t_s, soc_true, soc_est;
    std::vector<EstimatorMode> mode;
    std::vector<ResetEvent> resets;
    std::size_t skipped_stops = 0;  // qualifying stops too short for the block

    std::size_t size() const { return t_s.size(); }
};

struct ResetPolicy {
    enum class Mode { StopTriggered, Continuous };
    Mode mode = Mode::StopTriggered;
    bool enable_resets = true;       // false: pure coulomb-counting baseline
    double min_stop_s = 25.0;        // shortest stop worth pulsing in
    double pulse_c_rate = 1.0;
    double continuous_cadence_s = 120.0;  // Continuous mode only
    double eta_charge_assumed = 0.99;
    double eta_discharge_assumed = 1.0;
    double initial_estimate = -1.0;  // < 0: start from the true SoC
};

// Inference hook. Production use wraps SocModel::predict; tests can close
// over the context to emulate a perfect estimator.
struct ResetContext {
    double t_s = 0.0;
    double soc_true = 0.0;
};
using InferenceFn = std::function<double(const std::vector<double>&, const ResetContext&)>;

inline InferenceFn inference_from(const SocModel& model) {
    return [&model](const std::vector<double>& features, const ResetContext&) {
        return model.predict(features);
    };
}

// Drive-cycle runtime: the simulated cell follows the profile; the estimator
// sees only corrupted measurements and coulomb-counts between corrections.
// In stop-triggered mode a compact charge/rest/discharge pulse block is
// injected at every long-enough stop, featurized from the measured voltages,
// and the estimate resets to the model's output.
inline EstimatorTrace run_drive_cycle(const CellParams& params, CellState state,
                                      const DriveProfile& profile,
                                      const SensorModel& sensor,
                                      const FeatureConfig& feature_cfg,
                                      const InferenceFn& infer,
                                      const ResetPolicy& policy,
                                      std::uint64_t noise_seed = 0) {
    sensor.validate();
    feature_cfg.validate();
    if (profile.current_a.empty())
        throw std::invalid_argument("run_drive_cycle: empty profile");
    if (policy.enable_resets && !infer)
        throw std::invalid_argument("run_drive_cycle: resets enabled but no inference fn");

    const double dt = profile.dt_s;
    const double stride_f = 1.0 / (feature_cfg.feature_rate_hz * dt);
    const std::size_t stride = static_cast<std::size_t>(std::llround(stride_f));
    if (!feature_cfg.ocv_only &&
        (stride == 0 || std::abs(stride_f - static_cast<double>(stride)) > 1e-9))
        throw std::invalid_argument(
            "run_drive_cycle: feature rate must stride the profile rate evenly");

    const std::size_t n_charge = feature_cfg.segment_count(feature_cfg.charge_pulse_s);
    const std::size_t n_rest = feature_cfg.segment_count(feature_cfg.inter_rest_s);
    const std::size_t n_dis = feature_cfg.segment_count(feature_cfg.discharge_pulse_s);
    const std::size_t block_ticks =
        feature_cfg.ocv_only
            ? 1
            : static_cast<std::size_t>(
                  std::llround((feature_cfg.charge_pulse_s + feature_cfg.inter_rest_s +
                                feature_cfg.discharge_pulse_s) / dt));
    const double block_s = static_cast<double>(block_ticks) * dt;

    Rng rng(noise_seed);
    EstimatorTrace trace;
    trace.dt_s = dt;

    double est = policy.initial_estimate >= 0.0
                     ? std::clamp(policy.initial_estimate, 0.0, 1.0)
                     : state.soc;

    // stop start index -> stop, for O(1) lookup in the main loop
    std::vector<DriveProfile::Stop> stops =
        policy.enable_resets && policy.mode == ResetPolicy::Mode::StopTriggered
            ? profile.stops(policy.min_stop_s)
            : std::vector<DriveProfile::Stop>{};
    std::size_t next_stop = 0;

    const double i_pulse = policy.pulse_c_rate * params.capacity_ah;

    auto measure_current = [&](double true_i) {
        return true_i + sensor.current_bias_a +
               (sensor.current_noise_sigma_a > 0
                    ? sensor.current_noise_sigma_a * rng.gaussian()
                    : 0.0);
    };
    auto measure_voltage = [&](double true_v) {
        return true_v + (sensor.voltage_noise_sigma_v > 0
                             ? sensor.voltage_noise_sigma_v * rng.gaussian()
                             : 0.0);
    };
    auto advance = [&](double true_i, EstimatorMode mode) {
        const double v_true = terminal_voltage(state, params, true_i);
        const double v_meas = measure_voltage(v_true);
        const double i_meas = measure_current(true_i);
        trace.t_s.push_back(static_cast<double>(trace.size()) * dt);
        trace.soc_true.push_back(state.soc);
        trace.soc_est.push_back(est);
        trace.mode.push_back(mode);
        const double eta = i_meas > 0 ? policy.eta_charge_assumed
                                      : 1.0 / policy.eta_discharge_assumed;
        est = coulomb_step(est, i_meas, dt, sensor.capacity_assumed_ah, eta);
        state = step(state, params, true_i, dt);
        return v_meas;
    };

    // Continuous mode keeps a trailing window of measured voltages.
    std::deque<double> recent_v;
    const std::size_t window_ticks = block_ticks;
    const std::size_t cadence_ticks = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(policy.continuous_cadence_s / dt)));

    std::size_t i = 0;
    while (i < profile.current_a.size()) {
        const bool at_stop = next_stop < stops.size() && stops[next_stop].begin == i;
        if (at_stop) {
            const auto& stop = stops[next_stop];
            ++next_stop;
            if (stop.duration_s + 1e-9 < block_s || i + block_ticks > profile.current_a.size()) {
                ++trace.skipped_stops;
            } else {
                // inject the pulse block in place of the first part of the stop
                std::vector<double> v_charge, v_rest, v_dis;
                for (std::size_t k = 0; k < block_ticks; ++k) {
                    double true_i = 0.0;
                    const double tk = static_cast<double>(k) * dt;
                    if (tk < feature_cfg.charge_pulse_s) true_i = i_pulse;
                    else if (tk < feature_cfg.charge_pulse_s + feature_cfg.inter_rest_s)
                        true_i = 0.0;
                    else true_i = -i_pulse;
                    const double v_meas = advance(true_i, EstimatorMode::Reset);
                    if (tk < feature_cfg.charge_pulse_s) v_charge.push_back(v_meas);
                    else if (tk < feature_cfg.charge_pulse_s + feature_cfg.inter_rest_s)
                        v_rest.push_back(v_meas);
                    else v_dis.push_back(v_meas);
                }
                std::vector<double> window;
                auto slice = [&](const std::vector<double>& seg, std::size_t count) {
                    for (std::size_t k = 0; k < count; ++k)
                        window.push_back(seg[k * stride]);
                };
                if (feature_cfg.use_charge) slice(v_charge, n_charge);
                if (feature_cfg.use_rest) slice(v_rest, n_rest);
                if (feature_cfg.use_discharge) slice(v_dis, n_dis);
                const auto features = featurize(window, policy.pulse_c_rate, feature_cfg);

                ResetEvent ev;
                ev.t_s = static_cast<double>(trace.size()) * dt;
                ev.pre_estimate = est;
                ev.soc_true = state.soc;
                est = std::clamp(infer(features, {ev.t_s, state.soc}), 0.0, 1.0);
                ev.post_estimate = est;
                trace.resets.push_back(ev);
                i += block_ticks;
                continue;
            }
        }

        const double v_meas = advance(profile.current_a[i], EstimatorMode::Coulomb);
        if (policy.enable_resets && policy.mode == ResetPolicy::Mode::Continuous) {
            recent_v.push_back(v_meas);
            if (recent_v.size() > window_ticks) recent_v.pop_front();
            if (recent_v.size() == window_ticks && (i + 1) % cadence_ticks == 0) {
                std::vector<double> window;
                const std::size_t n_feat = feature_cfg.voltage_feature_count();
                for (std::size_t k = 0; k < n_feat; ++k) window.push_back(recent_v[k * stride]);
                const auto features = featurize(window, policy.pulse_c_rate, feature_cfg);
                ResetEvent ev;
                ev.t_s = static_cast<double>(trace.size()) * dt;
                ev.pre_estimate = est;
                ev.soc_true = state.soc;
                est = std::clamp(infer(features, {ev.t_s, state.soc}), 0.0, 1.0);
                ev.post_estimate = est;
                trace.resets.push_back(ev);
                if (!trace.mode.empty()) trace.mode.back() = EstimatorMode::Reset;
            }
        }
        ++i;
    }
    return trace;
}

struct TraceSummary {
    double max_abs_err = 0.0;
    double mean_abs_err = 0.0;
    double end_err = 0.0;
    double t_at_max_abs_err = 0.0;
    // least-squares slope of (estimate - truth) per maximal coulomb segment
    std::vector<double> segment_drift_slopes;
};

inline TraceSummary summarize(const EstimatorTrace& trace) {
    if (trace.size() == 0) throw std::invalid_argument("summarize: empty trace");
    TraceSummary s;
    double sum_abs = 0.0;
    for (std::size_t i = 0; i < trace.size(); ++i) {
        const double err = trace.soc_est[i] - trace.soc_true[i];
        sum_abs += std::abs(err);
        if (std::abs(err) > s.max_abs_err) {
            s.max_abs_err = std::abs(err);
            s.t_at_max_abs_err = trace.t_s[i];
        }
    }
    s.mean_abs_err = sum_abs / static_cast<double>(trace.size());
    s.end_err = trace.soc_est.back() - trace.soc_true.back();

    for (std::size_t i = 0; i < trace.size();) {
        if (trace.mode[i] != EstimatorMode::Coulomb) { ++i; continue; }
        std::size_t j = i;
        while (j < trace.size() && trace.mode[j] == EstimatorMode::Coulomb) ++j;
        if (j - i >= 2) {
            double st = 0, se = 0, stt = 0, ste = 0;
            const double n = static_cast<double>(j - i);
            for (std::size_t k = i; k < j; ++k) {
                const double t = trace.t_s[k];
                const double e = trace.soc_est[k] - trace.soc_true[k];
                st += t;
                se += e;
                stt += t * t;
                ste += t * e;
            }
            const double denom = n * stt - st * st;
            if (denom != 0.0) s.segment_drift_slopes.push_back((n * ste - st * se) / denom);
        }
        i = j;
    }
    return s;
}

// ---- CSV I/O ----

inline void write_trace_csv(const EstimatorTrace& trace, std::ostream& out) {
    out << "t_s,soc_true,soc_est,mode\n";
    char buf[96];
    for (std::size_t i = 0; i < trace.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.6f,%.6f,%.6f,", trace.t_s[i],
                      trace.soc_true[i], trace.soc_est[i]);
        out << buf
            << (trace.mode[i] == EstimatorMode::Coulomb ? "COULOMB" : "RESET")
            << '\n';
    }
}

inline void write_resets_csv(const EstimatorTrace& trace, std::ostream& out) {
    out << "t_s,pre_reset_soc_est,post_reset_soc_est,soc_true\n";
    char buf[128];
    for (const ResetEvent& ev : trace.resets) {
        std::snprintf(buf, sizeof(buf), "%.6f,%.6f,%.6f,%.6f\n", ev.t_s,
                      ev.pre_estimate, ev.post_estimate, ev.soc_true);
        out << buf;
    }
}

// External drive profiles: CSV `t_s,current_a` with uniform spacing.
inline DriveProfile read_drive_profile_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line))
        throw std::runtime_error("drive profile CSV: empty input");
    if (line.rfind("t_s,current_a", 0) != 0)
        throw std::runtime_error("drive profile CSV: unexpected header: " + line);
    std::vector<double> t, c;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos)
            throw std::runtime_error("drive profile CSV line " +
                                     std::to_string(line_no) + ": missing field");
        try {
            t.push_back(std::stod(line.substr(0, comma)));
            c.push_back(std::stod(line.substr(comma + 1)));
        } catch (const std::exception&) {
            throw std::runtime_error("drive profile CSV line " +
                                     std::to_string(line_no) + ": bad number");
        }
    }
    if (t.size() < 2) throw std::runtime_error("drive profile CSV: need >= 2 samples");
    const double dt = t[1] - t[0];
    for (std::size_t i = 1; i < t.size(); ++i)
        if (std::abs((t[i] - t[i - 1]) - dt) > 1e-6)
            throw std::runtime_error("drive profile CSV: non-uniform sampling");
    DriveProfile prof;
    prof.dt_s = dt;
    prof.current_a = std::move(c);
    return prof;
}

} // namespace pulsesoc
