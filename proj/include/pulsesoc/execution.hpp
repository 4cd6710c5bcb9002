#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "pulsesoc/cell.hpp"
#include "pulsesoc/schedule.hpp"

namespace pulsesoc {

// Uniform time series produced by running a schedule. One row per sample_dt
// tick: the commanded current, the terminal voltage at the moment the
// current is applied, the simulator's true SoC at the tick, and the label of
// the originating step. Labels are interned; per-sample storage is an index.
class PhaseLog {
public:
    explicit PhaseLog(double sample_dt = 0.1) : sample_dt_(sample_dt) {}

    double sample_dt() const { return sample_dt_; }
    std::size_t size() const { return t_s_.size(); }
    bool empty() const { return t_s_.empty(); }

    double t_s(std::size_t i) const { return t_s_[i]; }
    double current_a(std::size_t i) const { return current_a_[i]; }
    double voltage_v(std::size_t i) const { return voltage_v_[i]; }
    double soc_true(std::size_t i) const { return soc_true_[i]; }
    const std::string& label(std::size_t i) const { return labels_[label_idx_[i]]; }

    void append(double t, double i_a, double v, double soc, const std::string& label) {
        t_s_.push_back(t);
        current_a_.push_back(i_a);
        voltage_v_.push_back(v);
        soc_true_.push_back(soc);
        label_idx_.push_back(intern(label));
    }

    // Label runs in log order: (label, first index, one past last).
    struct Run {
        std::string label;
        std::size_t begin;
        std::size_t end;
    };
    std::vector<Run> runs() const {
        std::vector<Run> out;
        for (std::size_t i = 0; i < size();) {
            std::size_t j = i;
            while (j < size() && label_idx_[j] == label_idx_[i]) ++j;
            out.push_back({labels_[label_idx_[i]], i, j});
            i = j;
        }
        return out;
    }

    // First run with the given label, if any.
    std::optional<Run> find_run(const std::string& label) const {
        for (const Run& r : runs())
            if (r.label == label) return r;
        return std::nullopt;
    }

private:
    std::uint32_t intern(const std::string& label) {
        if (!labels_.empty() && labels_.back() == label)
            return static_cast<std::uint32_t>(labels_.size() - 1);
        for (std::size_t i = 0; i < labels_.size(); ++i)
            if (labels_[i] == label) return static_cast<std::uint32_t>(i);
        labels_.push_back(label);
        return static_cast<std::uint32_t>(labels_.size() - 1);
    }

    double sample_dt_;
    std::vector<double> t_s_, current_a_, voltage_v_, soc_true_;
    std::vector<std::uint32_t> label_idx_;
    std::vector<std::string> labels_;
};

struct ExecutionOptions {
    double sample_dt = 0.1;
    std::uint64_t seed = 0;  // reserved for measurement-noise hooks; the
                             // cycler itself is deterministic
    double max_step_duration_s = 200000.0;  // watchdog per step
    double t0_s = 0.0;                      // timestamp of the first sample
};

struct ExecutionResult {
    PhaseLog log;
    CellState state;
    bool truncated = false;          // schedule aborted at v_min
    std::size_t steps_executed = 0;  // fully completed steps
};

// Run a schedule against a cell. Per tick: decide the command current,
// record the sample, advance the cell by sample_dt, then evaluate the
// step's terminators on the post-step measurements (first hit ends the
// step). A step that never reaches a terminator trips the watchdog.
inline ExecutionResult execute(const Schedule& schedule, const CellParams& params,
                               CellState state, const ExecutionOptions& opts = {}) {
    if (!(opts.sample_dt > 0))
        throw std::invalid_argument("execute: sample_dt must be > 0");
    {
        auto problems = validate(schedule, params);
        if (!problems.empty())
            throw std::invalid_argument("execute: invalid schedule: " + problems.front());
    }

    ExecutionResult res;
    res.log = PhaseLog(opts.sample_dt);
    double t = opts.t0_s;

    for (std::size_t si = 0; si < schedule.steps.size(); ++si) {
        const Step& stp = schedule.steps[si];
        double elapsed = 0.0;
        bool done = false;
        while (!done) {
            if (elapsed > opts.max_step_duration_s)
                throw std::runtime_error("execute: watchdog expired in step '" +
                                         stp.label + "' after " +
                                         std::to_string(elapsed) + " s");
            double i_a = 0.0;
            switch (stp.kind) {
                case Step::Kind::CC:
                case Step::Kind::GOTO_SOC: i_a = stp.current_a; break;
                case Step::Kind::CV: i_a = cv_current(state, params, stp.v_set); break;
                case Step::Kind::REST: i_a = 0.0; break;
            }

            res.log.append(t, i_a, terminal_voltage(state, params, i_a),
                           state.soc, stp.label);

            double v_post = 0.0;
            state = step(state, params, i_a, opts.sample_dt, &v_post);
            t += opts.sample_dt;
            elapsed += opts.sample_dt;

            for (const Terminator& term : stp.terminators) {
                if (term.satisfied(v_post, i_a, state.soc, elapsed)) {
                    done = true;
                    break;
                }
            }
            if (schedule.abort_on_v_min && v_post <= params.v_min) {
                res.truncated = !done || si + 1 < schedule.steps.size();
                res.steps_executed = si + (done ? 1 : 0);
                res.state = state;
                return res;
            }
        }
        res.steps_executed = si + 1;
    }
    res.state = state;
    return res;
}

// Trapezoidal integral of |current| over the samples of a labeled window,
// in amp-hours.
inline double measure_capacity(const PhaseLog& log, const std::string& window_label) {
    auto run = log.find_run(window_label);
    if (!run)
        throw std::runtime_error("measure_capacity: no samples labeled '" +
                                 window_label + "'");
    double ah = 0.0;
    for (std::size_t i = run->begin + 1; i < run->end; ++i) {
        const double dt = log.t_s(i) - log.t_s(i - 1);
        ah += 0.5 * (std::abs(log.current_a(i)) + std::abs(log.current_a(i - 1))) * dt;
    }
    return ah / 3600.0;
}

struct PulseTrainConfig {
    std::vector<double> breakpoints;  // empty -> 0.90 .. 0.20 in 10% steps
    double pulse_c_rate = 1.0;
    double pulse_s = 60.0;
    double inter_rest_s = 60.0;
    double relax_s = 3600.0;
    double post_charge_rest_s = 5400.0;
};

struct FullProcedureOptions {
    std::size_t aging_cycles_per_iteration = 10;
    double time_compression = 1.0;  // >= 1, divides rest/relax durations only
    bool keep_capacity_logs = true;
    ExecutionOptions exec;
};

struct ProcedureIteration {
    std::size_t iteration = 0;            // 0-based
    std::size_t aging_cycles_before = 0;  // completed before this check
    double fce_at_check = 0.0;
    double capacity_ah = 0.0;
    std::optional<PhaseLog> capacity_log;
};

struct FullProcedureResult {
    double original_capacity_ah = 0.0;  // first measured capacity
    std::vector<ProcedureIteration> iterations;
    std::size_t total_aging_cycles = 0;
    CellState final_state;
};

// The overall lab loop: capacity check, pulse train, K aging cycles, around
// again until the measured capacity falls to `until` times the first
// measurement. Parameters are re-derived from the pristine set and the
// cell's accumulated FCE at the start of every phase.
inline FullProcedureResult full_procedure(const CellParams& pristine,
                                          const AgingParams& aging,
                                          const PulseTrainConfig& pulse_cfg = {},
                                          double until = 0.8,
                                          const FullProcedureOptions& opts = {}) {
    if (!(until > 0.0 && until <= 1.0))
        throw std::invalid_argument("full_procedure: until must be in (0,1]");
    if (!(opts.time_compression >= 1.0))
        throw std::invalid_argument("full_procedure: time_compression must be >= 1");

    const double tc = opts.time_compression;
    FullProcedureResult res;
    CellState state = CellState::rested(1.0, pristine);

    for (std::size_t iter = 0;; ++iter) {
        ProcedureIteration rec;
        rec.iteration = iter;
        rec.aging_cycles_before = res.total_aging_cycles;
        rec.fce_at_check = state.fce;

        CellParams aged = apply_aging(pristine, aging, state.fce);
        auto check = execute(build_capacity_check(aged, 600.0 / tc), aged, state,
                             opts.exec);
        state = check.state;
        rec.capacity_ah = measure_capacity(check.log, "discharge");
        if (opts.keep_capacity_logs) rec.capacity_log = std::move(check.log);

        if (iter == 0) res.original_capacity_ah = rec.capacity_ah;
        const bool stop = rec.capacity_ah <= until * res.original_capacity_ah;
        res.iterations.push_back(std::move(rec));
        if (stop) break;

        aged = apply_aging(pristine, aging, state.fce);
        auto train = execute(
            build_pulse_train(aged, pulse_cfg.breakpoints, pulse_cfg.pulse_c_rate,
                              pulse_cfg.pulse_s, pulse_cfg.inter_rest_s,
                              pulse_cfg.relax_s / tc,
                              pulse_cfg.post_charge_rest_s / tc),
            aged, state, opts.exec);
        state = train.state;

        for (std::size_t k = 0; k < opts.aging_cycles_per_iteration; ++k) {
            aged = apply_aging(pristine, aging, state.fce);
            auto cycle = execute(build_aging_cycle(aged), aged, state, opts.exec);
            state = cycle.state;
            ++res.total_aging_cycles;
        }
    }
    res.final_state = state;
    return res;
}

// ---- PhaseLog CSV, the contract consumed by the dataset stage ----
// Header `t_s,current_a,voltage_v,soc_true,label`, numbers at fixed six
// decimals.

inline void write_phase_log_csv(const PhaseLog& log, std::ostream& out) {
    out << "t_s,current_a,voltage_v,soc_true,label\n";
    char buf[160];
    for (std::size_t i = 0; i < log.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.6f,%.6f,%.6f,%.6f,", log.t_s(i),
                      log.current_a(i), log.voltage_v(i), log.soc_true(i));
        out << buf << log.label(i) << '\n';
    }
}

inline void write_phase_log_csv(const PhaseLog& log, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for write: " + path);
    write_phase_log_csv(log, out);
}

inline PhaseLog read_phase_log_csv(std::istream& in, double sample_dt = 0.1) {
    std::string line;
    if (!std::getline(in, line))
        throw std::runtime_error("phase log CSV: empty input");
    if (line.rfind("t_s,current_a,voltage_v,soc_true,label", 0) != 0)
        throw std::runtime_error("phase log CSV: unexpected header: " + line);
    PhaseLog log(sample_dt);
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        double vals[4];
        std::size_t pos = 0;
        for (int f = 0; f < 4; ++f) {
            auto comma = line.find(',', pos);
            if (comma == std::string::npos)
                throw std::runtime_error("phase log CSV line " +
                                         std::to_string(line_no) + ": too few fields");
            try {
                vals[f] = std::stod(line.substr(pos, comma - pos));
            } catch (const std::exception&) {
                throw std::runtime_error("phase log CSV line " +
                                         std::to_string(line_no) + ": bad number");
            }
            pos = comma + 1;
        }
        log.append(vals[0], vals[1], vals[2], vals[3], line.substr(pos));
    }
    return log;
}

inline PhaseLog read_phase_log_csv_file(const std::string& path, double sample_dt = 0.1) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open: " + path);
    return read_phase_log_csv(in, sample_dt);
}

} // namespace pulsesoc
