#pragma once

#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "pulsesoc/cell.hpp"

namespace pulsesoc {

// One termination condition, checked every sample. A step ends at the first
// sample where any of its terminators holds.
struct Terminator {
    enum class Kind {
        VoltageAtOrAbove,
        VoltageAtOrBelow,
        CurrentAtOrBelow,  // |I| <= value
        SocAtOrBelow,
        SocAtOrAbove,
        ElapsedAtLeast,
    };
    Kind kind;
    double value;

    // SoC comparisons get a hair of slack so that an exactly-representable
    // target is hit on the expected sample despite accumulated rounding.
    static constexpr double kSocTol = 1e-9;

    bool satisfied(double voltage_v, double current_a, double soc,
                   double elapsed_s) const {
        switch (kind) {
            case Kind::VoltageAtOrAbove: return voltage_v >= value;
            case Kind::VoltageAtOrBelow: return voltage_v <= value;
            case Kind::CurrentAtOrBelow: return std::abs(current_a) <= value;
            case Kind::SocAtOrBelow: return soc <= value + kSocTol;
            case Kind::SocAtOrAbove: return soc >= value - kSocTol;
            case Kind::ElapsedAtLeast: return elapsed_s >= value - 1e-9;
        }
        return false;
    }
};

struct Step {
    enum class Kind { CC, CV, REST, GOTO_SOC };
    Kind kind = Kind::REST;
    double current_a = 0.0;  // CC and GOTO_SOC
    double v_set = 0.0;      // CV
    std::vector<Terminator> terminators;
    std::string label;

    static Step cc(double current_a, std::vector<Terminator> terms, std::string label) {
        Step s;
        s.kind = Kind::CC;
        s.current_a = current_a;
        s.terminators = std::move(terms);
        s.label = std::move(label);
        return s;
    }
    static Step cv(double v_set, double i_cutoff_a, std::string label) {
        Step s;
        s.kind = Kind::CV;
        s.v_set = v_set;
        s.terminators = {{Terminator::Kind::CurrentAtOrBelow, i_cutoff_a}};
        s.label = std::move(label);
        return s;
    }
    static Step rest(double duration_s, std::string label) {
        Step s;
        s.kind = Kind::REST;
        s.terminators = {{Terminator::Kind::ElapsedAtLeast, duration_s}};
        s.label = std::move(label);
        return s;
    }
    static Step goto_soc(double current_a, double target_soc, std::string label) {
        Step s;
        s.kind = Kind::GOTO_SOC;
        s.current_a = current_a;
        s.terminators = {{current_a < 0 ? Terminator::Kind::SocAtOrBelow
                                        : Terminator::Kind::SocAtOrAbove,
                          target_soc}};
        s.label = std::move(label);
        return s;
    }
};

struct Schedule {
    std::string name;
    std::vector<Step> steps;
    std::map<std::string, double> metadata;  // generated-from parameters
    // When set, the whole schedule aborts (remaining steps skipped, recorded
    // as truncation, not an error) once the terminal voltage falls to v_min.
    bool abort_on_v_min = false;
};

// Static checks over a schedule: structure, label uniqueness, and current
// limits. Returns human-readable problems; empty means valid.
inline std::vector<std::string> validate(const Schedule& schedule,
                                         const CellParams& params) {
    std::vector<std::string> problems;
    if (schedule.steps.empty()) problems.push_back("schedule has no steps");
    std::set<std::string> labels;
    for (std::size_t i = 0; i < schedule.steps.size(); ++i) {
        const Step& s = schedule.steps[i];
        const std::string where = "step " + std::to_string(i) + " ('" + s.label + "')";
        if (s.label.empty()) problems.push_back(where + ": empty label");
        if (!labels.insert(s.label).second)
            problems.push_back(where + ": duplicate label");
        if (s.terminators.empty()) problems.push_back(where + ": no terminator");
        if (s.kind == Step::Kind::CC || s.kind == Step::Kind::GOTO_SOC) {
            if (s.current_a > params.i_max_charge_a ||
                s.current_a < -params.i_max_discharge_a)
                problems.push_back(where + ": current " + std::to_string(s.current_a) +
                                   " A outside cell limits");
        }
        if (s.kind == Step::Kind::CV &&
            (s.v_set < params.v_min || s.v_set > params.v_max))
            problems.push_back(where + ": CV setpoint outside [v_min, v_max]");
    }
    return problems;
}

// Full CCCV charge at 1C, used as the entry of several procedures.
inline void append_full_charge(Schedule& sch, const CellParams& p,
                               const std::string& prefix) {
    const double i_1c = p.capacity_ah;
    sch.steps.push_back(Step::cc(
        i_1c, {{Terminator::Kind::VoltageAtOrAbove, p.v_max}}, prefix + "_cc"));
    sch.steps.push_back(Step::cv(p.v_max, p.i_cutoff_a, prefix + "_cv"));
}

// Capacity check: trickle 0.1C CCCV charge, rest, 0.1C discharge to v_min,
// rest. The "discharge" label marks the integration window for the capacity
// measurement.
inline Schedule build_capacity_check(const CellParams& params,
                                     double rest_s = 600.0) {
    const double i = 0.1 * params.capacity_ah;
    Schedule sch;
    sch.name = "capacity-check";
    sch.metadata["c_rate"] = 0.1;
    sch.metadata["rest_s"] = rest_s;
    sch.steps.push_back(Step::cc(
        i, {{Terminator::Kind::VoltageAtOrAbove, params.v_max}}, "charge"));
    sch.steps.push_back(Step::cv(params.v_max, params.i_cutoff_a, "charge_cv"));
    sch.steps.push_back(Step::rest(rest_s, "rest_post_charge"));
    sch.steps.push_back(Step::cc(
        -i, {{Terminator::Kind::VoltageAtOrBelow, params.v_min}}, "discharge"));
    sch.steps.push_back(Step::rest(rest_s, "rest_post_discharge"));
    return sch;
}

// Label stem for a breakpoint, e.g. 0.9 -> "90", 0.855 -> "85.5".
inline std::string breakpoint_tag(double breakpoint) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%g", breakpoint * 100.0);
    return buf;
}

inline std::string pulse_block_label(double breakpoint, const char* part) {
    return "pulse_" + breakpoint_tag(breakpoint) + "_" + part;
}

// Pulse train: full CCCV charge, long rest, then per SoC breakpoint a 1C
// discharge to the breakpoint, a relaxation rest, and the charge/rest/
// discharge pulse block. Aborts cleanly if the cell hits v_min.
inline Schedule build_pulse_train(const CellParams& params,
                                  std::vector<double> breakpoints = {},
                                  double pulse_c_rate = 1.0,
                                  double pulse_s = 60.0,
                                  double inter_rest_s = 60.0,
                                  double relax_s = 3600.0,
                                  double post_charge_rest_s = 5400.0) {
    if (breakpoints.empty())
        for (int pct = 90; pct >= 20; pct -= 10) breakpoints.push_back(pct / 100.0);
    for (std::size_t i = 0; i < breakpoints.size(); ++i) {
        if (!(breakpoints[i] > 0.0 && breakpoints[i] < 1.0))
            throw std::invalid_argument("pulse train: breakpoints must lie in (0,1)");
        if (i > 0 && !(breakpoints[i] < breakpoints[i - 1]))
            throw std::invalid_argument(
                "pulse train: breakpoints must be strictly decreasing");
    }
    if (!(pulse_c_rate > 0)) throw std::invalid_argument("pulse_c_rate must be > 0");

    const double i_pulse = pulse_c_rate * params.capacity_ah;
    const double i_1c = params.capacity_ah;

    Schedule sch;
    sch.name = "pulse-train";
    sch.abort_on_v_min = true;
    sch.metadata["pulse_c_rate"] = pulse_c_rate;
    sch.metadata["pulse_s"] = pulse_s;
    sch.metadata["inter_rest_s"] = inter_rest_s;
    sch.metadata["relax_s"] = relax_s;
    sch.metadata["breakpoints"] = static_cast<double>(breakpoints.size());

    append_full_charge(sch, params, "charge");
    sch.steps.push_back(Step::rest(post_charge_rest_s, "rest_post_charge"));

    for (double bp : breakpoints) {
        const std::string tag = breakpoint_tag(bp);
        sch.steps.push_back(Step::goto_soc(-i_1c, bp, "goto_" + tag));
        sch.steps.push_back(Step::rest(relax_s, "relax_" + tag));
        Step charge_pulse = Step::cc(
            i_pulse, {{Terminator::Kind::ElapsedAtLeast, pulse_s}},
            pulse_block_label(bp, "charge"));
        sch.steps.push_back(charge_pulse);
        sch.steps.push_back(Step::rest(inter_rest_s, pulse_block_label(bp, "rest")));
        sch.steps.push_back(Step::cc(
            -i_pulse, {{Terminator::Kind::ElapsedAtLeast, pulse_s}},
            pulse_block_label(bp, "discharge")));
    }
    return sch;
}

// One accelerated aging cycle: 1C full discharge, 1C CCCV recharge.
inline Schedule build_aging_cycle(const CellParams& params) {
    const double i_1c = params.capacity_ah;
    Schedule sch;
    sch.name = "aging-cycle";
    sch.steps.push_back(Step::cc(
        -i_1c, {{Terminator::Kind::VoltageAtOrBelow, params.v_min}}, "discharge"));
    sch.steps.push_back(Step::cc(
        i_1c, {{Terminator::Kind::VoltageAtOrAbove, params.v_max}}, "charge"));
    sch.steps.push_back(Step::cv(params.v_max, params.i_cutoff_a, "charge_cv"));
    return sch;
}

// ---- JSON (de)serialization, schema documented in docs/file_formats.md ----

inline const char* to_string(Step::Kind k) {
    switch (k) {
        case Step::Kind::CC: return "CC";
        case Step::Kind::CV: return "CV";
        case Step::Kind::REST: return "REST";
        case Step::Kind::GOTO_SOC: return "GOTO_SOC";
    }
    return "?";
}

inline const char* to_string(Terminator::Kind k) {
    switch (k) {
        case Terminator::Kind::VoltageAtOrAbove: return "voltage_at_or_above";
        case Terminator::Kind::VoltageAtOrBelow: return "voltage_at_or_below";
        case Terminator::Kind::CurrentAtOrBelow: return "current_at_or_below";
        case Terminator::Kind::SocAtOrBelow: return "soc_at_or_below";
        case Terminator::Kind::SocAtOrAbove: return "soc_at_or_above";
        case Terminator::Kind::ElapsedAtLeast: return "elapsed_at_least";
    }
    return "?";
}

inline nlohmann::json to_json(const Schedule& sch) {
    nlohmann::json steps = nlohmann::json::array();
    for (const Step& s : sch.steps) {
        nlohmann::json terms = nlohmann::json::array();
        for (const Terminator& t : s.terminators)
            terms.push_back({{"kind", to_string(t.kind)}, {"value", t.value}});
        nlohmann::json js{{"kind", to_string(s.kind)},
                          {"label", s.label},
                          {"terminators", terms}};
        if (s.kind == Step::Kind::CC || s.kind == Step::Kind::GOTO_SOC)
            js["current_a"] = s.current_a;
        if (s.kind == Step::Kind::CV) js["v_set"] = s.v_set;
        steps.push_back(js);
    }
    return nlohmann::json{{"schema", "pulsesoc.schedule"},
                          {"version", 1},
                          {"name", sch.name},
                          {"abort_on_v_min", sch.abort_on_v_min},
                          {"metadata", sch.metadata},
                          {"steps", steps}};
}

inline Schedule schedule_from_json(const nlohmann::json& j) {
    if (j.value("schema", "") != "pulsesoc.schedule")
        throw std::runtime_error("schedule: unexpected schema field");
    if (j.value("version", 0) != 1)
        throw std::runtime_error("schedule: unsupported version");
    Schedule sch;
    sch.name = j.at("name").get<std::string>();
    sch.abort_on_v_min = j.value("abort_on_v_min", false);
    if (j.contains("metadata"))
        sch.metadata = j.at("metadata").get<std::map<std::string, double>>();
    for (const auto& js : j.at("steps")) {
        Step s;
        const std::string kind = js.at("kind").get<std::string>();
        if (kind == "CC") s.kind = Step::Kind::CC;
        else if (kind == "CV") s.kind = Step::Kind::CV;
        else if (kind == "REST") s.kind = Step::Kind::REST;
        else if (kind == "GOTO_SOC") s.kind = Step::Kind::GOTO_SOC;
        else throw std::runtime_error("schedule: unknown step kind '" + kind + "'");
        s.label = js.at("label").get<std::string>();
        s.current_a = js.value("current_a", 0.0);
        s.v_set = js.value("v_set", 0.0);
        for (const auto& jt : js.at("terminators")) {
            const std::string tk = jt.at("kind").get<std::string>();
            Terminator t{};
            if (tk == "voltage_at_or_above") t.kind = Terminator::Kind::VoltageAtOrAbove;
            else if (tk == "voltage_at_or_below") t.kind = Terminator::Kind::VoltageAtOrBelow;
            else if (tk == "current_at_or_below") t.kind = Terminator::Kind::CurrentAtOrBelow;
            else if (tk == "soc_at_or_below") t.kind = Terminator::Kind::SocAtOrBelow;
            else if (tk == "soc_at_or_above") t.kind = Terminator::Kind::SocAtOrAbove;
            else if (tk == "elapsed_at_least") t.kind = Terminator::Kind::ElapsedAtLeast;
            else throw std::runtime_error("schedule: unknown terminator '" + tk + "'");
            t.value = jt.at("value").get<double>();
            s.terminators.push_back(t);
        }
        sch.steps.push_back(std::move(s));
    }
    return sch;
}

} // namespace pulsesoc
