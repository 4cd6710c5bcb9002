#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace pulsesoc {

// Open-circuit voltage as a function of state of charge. Two flavors share
// one type: the built-in closed-form curve (documented in
// docs/config_reference.md) and a user-supplied breakpoint table with linear
// interpolation. Both are non-decreasing on [0,1] with ocv(0)=v_min and
// ocv(1)=v_max.
//
// The default closed form is designed around a voltage plateau so that
// OCV-only SoC inversion is ill-posed on part of the range:
//   s in [0, ramp_end]          linear from v_min to v_plateau
//   s in [ramp_end, plateau_end] constant v_plateau
//   s in [plateau_end, 1]        v_plateau + (v_max - v_plateau) * u^2,
//                                u = (s - plateau_end) / (1 - plateau_end)
class OcvCurve {
public:
    static OcvCurve default_curve(double v_min = 2.5, double v_plateau = 3.45,
                                  double v_max = 4.2, double ramp_end = 0.05,
                                  double plateau_end = 0.40) {
        if (!(0.0 < ramp_end && ramp_end < plateau_end && plateau_end < 1.0))
            throw std::invalid_argument("OcvCurve: bad breakpoint layout");
        if (!(v_min < v_plateau && v_plateau < v_max))
            throw std::invalid_argument("OcvCurve: voltages must increase");
        OcvCurve c;
        c.v_min_ = v_min;
        c.v_plateau_ = v_plateau;
        c.v_max_ = v_max;
        c.ramp_end_ = ramp_end;
        c.plateau_end_ = plateau_end;
        return c;
    }

    // Breakpoint table, pairs (soc, volts), strictly increasing in soc and
    // non-decreasing in volts. Must cover soc 0 and 1.
    static OcvCurve from_table(std::vector<std::pair<double, double>> pts) {
        if (pts.size() < 2)
            throw std::invalid_argument("OcvCurve: table needs >= 2 points");
        for (std::size_t i = 1; i < pts.size(); ++i) {
            if (!(pts[i - 1].first < pts[i].first))
                throw std::invalid_argument(
                    "OcvCurve: table soc values must be strictly increasing");
            if (pts[i].second < pts[i - 1].second)
                throw std::invalid_argument(
                    "OcvCurve: table voltages must be non-decreasing");
        }
        if (pts.front().first != 0.0 || pts.back().first != 1.0)
            throw std::invalid_argument("OcvCurve: table must span soc 0..1");
        OcvCurve c;
        c.table_ = std::move(pts);
        return c;
    }

    double operator()(double soc) const {
        if (!(soc >= 0.0 && soc <= 1.0))
            throw std::domain_error("ocv: soc outside [0,1]");
        if (!table_.empty()) {
            auto it = std::lower_bound(
                table_.begin(), table_.end(), soc,
                [](const auto& p, double s) { return p.first < s; });
            if (it == table_.begin()) return it->second;
            if (it == table_.end()) return table_.back().second;
            const auto& [s1, v1] = *it;
            const auto& [s0, v0] = *(it - 1);
            const double w = (soc - s0) / (s1 - s0);
            return v0 + w * (v1 - v0);
        }
        if (soc <= ramp_end_)
            return v_min_ + (v_plateau_ - v_min_) * (soc / ramp_end_);
        if (soc <= plateau_end_) return v_plateau_;
        const double u = (soc - plateau_end_) / (1.0 - plateau_end_);
        return v_plateau_ + (v_max_ - v_plateau_) * u * u;
    }

    bool is_table() const { return !table_.empty(); }
    const std::vector<std::pair<double, double>>& table() const { return table_; }

    double v_at_zero() const { return table_.empty() ? v_min_ : table_.front().second; }
    double v_at_one() const { return table_.empty() ? v_max_ : table_.back().second; }

private:
    OcvCurve() = default;

    // closed-form parameters (unused when table_ is set)
    double v_min_ = 2.5, v_plateau_ = 3.45, v_max_ = 4.2;
    double ramp_end_ = 0.05, plateau_end_ = 0.40;

    std::vector<std::pair<double, double>> table_;
};

struct RcPair {
    double r_ohm;  // > 0
    double c_f;    // > 0
};

// Equivalent-circuit cell parameters. Defaults describe the stock 3 Ah cell.
//
// Resistances carry a linear SoC dependence r_eff(s) = r * (1 + r_soc_slope
// * (1 - s)): voltage drops grow as the cell depletes, which is what makes
// pulse responses informative about SoC inside the OCV plateau. Set
// r_soc_slope = 0 for a plain constant-parameter ECM.
struct CellParams {
    double capacity_ah = 3.0;
    double r0_ohm = 0.02;
    std::vector<RcPair> rc_pairs{{0.008, 1250.0}, {0.012, 8333.0}};
    double eta_charge = 0.99;     // coulombic efficiency, charging
    double eta_discharge = 1.0;   // coulombic efficiency, discharging
    OcvCurve ocv_curve = OcvCurve::default_curve();
    double v_max = 4.2;
    double v_min = 2.5;
    double i_cutoff_a = 0.150;        // CV termination current
    double i_max_charge_a = 4.0;
    double i_max_discharge_a = 15.0;  // magnitude
    double r_soc_slope = 2.0;

    void validate() const {
        if (!(capacity_ah > 0)) throw std::invalid_argument("capacity_ah must be > 0");
        if (!(r0_ohm >= 0)) throw std::invalid_argument("r0_ohm must be >= 0");
        for (const auto& rc : rc_pairs)
            if (!(rc.r_ohm > 0) || !(rc.c_f > 0))
                throw std::invalid_argument("rc pairs must have r > 0 and c > 0");
        if (!(eta_charge > 0 && eta_charge <= 1))
            throw std::invalid_argument("eta_charge must be in (0,1]");
        if (!(eta_discharge > 0 && eta_discharge <= 1))
            throw std::invalid_argument("eta_discharge must be in (0,1]");
        if (!(v_min < v_max)) throw std::invalid_argument("v_min must be < v_max");
        if (!(i_cutoff_a > 0)) throw std::invalid_argument("i_cutoff_a must be > 0");
        if (!(i_max_charge_a > 0 && i_max_discharge_a > 0))
            throw std::invalid_argument("current limits must be > 0");
        if (!(r_soc_slope >= 0)) throw std::invalid_argument("r_soc_slope must be >= 0");
    }

    // SoC-dependent resistance multiplier.
    double r_scale(double soc) const { return 1.0 + r_soc_slope * (1.0 - soc); }
};

// Aging model: linear capacity fade and series-resistance growth per
// equivalent full cycle, always evaluated from pristine parameters.
struct AgingParams {
    double fade_per_fce = 0.005;
    double r0_growth_per_fce = 0.01;

    void validate() const {
        if (!(fade_per_fce >= 0) || !(r0_growth_per_fce >= 0))
            throw std::invalid_argument("aging rates must be >= 0");
    }
};

struct CellState {
    double soc = 1.0;
    std::vector<double> v_rc;  // one entry per RC pair
    double throughput_ah = 0.0;
    double fce = 0.0;            // equivalent full cycles
    bool soc_clamped = false;    // sticky: a step hit the [0,1] bound
    bool over_current = false;   // sticky: a step exceeded the rated current

    static CellState rested(double soc, const CellParams& params) {
        if (!(soc >= 0.0 && soc <= 1.0))
            throw std::domain_error("CellState: soc outside [0,1]");
        CellState s;
        s.soc = soc;
        s.v_rc.assign(params.rc_pairs.size(), 0.0);
        return s;
    }
};

// Open-circuit voltage at a given soc.
inline double ocv(const CellParams& params, double soc) {
    return params.ocv_curve(soc);
}

// Instantaneous terminal voltage with current `current_a` flowing through
// the present state (sign convention: positive charges the cell).
inline double terminal_voltage(const CellState& state, const CellParams& params,
                               double current_a) {
    double v = ocv(params, state.soc) +
               current_a * params.r0_ohm * params.r_scale(state.soc);
    for (double vr : state.v_rc) v += vr;
    return v;
}

// Advance the cell by one step of constant current. The RC states use the
// exact exponential discretization, so splitting a step in two reproduces
// the single step to machine precision. SoC is clamped to [0,1] with a
// sticky flag rather than an error. Resistance scaling uses the SoC at the
// start of the step.
inline CellState step(const CellState& state, const CellParams& params,
                      double current_a, double dt_s, double* terminal_v = nullptr) {
    if (!(dt_s > 0)) throw std::invalid_argument("step: dt_s must be > 0");
    if (state.v_rc.size() != params.rc_pairs.size())
        throw std::invalid_argument("step: state/params RC size mismatch");

    CellState next = state;
    const double g = params.r_scale(state.soc);

    // out-of-rating current is flagged, not rejected; limits are the
    // caller's responsibility
    if (current_a > params.i_max_charge_a || current_a < -params.i_max_discharge_a)
        next.over_current = true;

    const double eta = current_a > 0 ? params.eta_charge
                                     : 1.0 / params.eta_discharge;
    double soc = state.soc + eta * current_a * dt_s / (3600.0 * params.capacity_ah);
    if (soc < 0.0) { soc = 0.0; next.soc_clamped = true; }
    if (soc > 1.0) { soc = 1.0; next.soc_clamped = true; }
    next.soc = soc;

    for (std::size_t i = 0; i < params.rc_pairs.size(); ++i) {
        const double r = params.rc_pairs[i].r_ohm * g;
        const double decay = std::exp(-dt_s / (r * params.rc_pairs[i].c_f));
        next.v_rc[i] = state.v_rc[i] * decay + r * current_a * (1.0 - decay);
    }

    const double dq_ah = std::abs(current_a) * dt_s / 3600.0;
    next.throughput_ah = state.throughput_ah + dq_ah;
    next.fce = state.fce + dq_ah / (2.0 * params.capacity_ah);

    if (terminal_v) {
        double v = ocv(params, next.soc) + current_a * params.r0_ohm * g;
        for (double vr : next.v_rc) v += vr;
        *terminal_v = v;
    }
    return next;
}

// Current needed to hold the terminal at v_set right now, clamped to the
// cell's current limits.
inline double cv_current(const CellState& state, const CellParams& params,
                         double v_set) {
    const double r0 = params.r0_ohm * params.r_scale(state.soc);
    if (r0 <= 0.0)
        throw std::runtime_error("cv_current: r0 is zero, CV solve is singular");
    double v_rc_sum = 0.0;
    for (double vr : state.v_rc) v_rc_sum += vr;
    double i = (v_set - ocv(params, state.soc) - v_rc_sum) / r0;
    return std::clamp(i, -params.i_max_discharge_a, params.i_max_charge_a);
}

// Parameters after `fce` equivalent full cycles of wear. Pure: always maps
// pristine -> aged, never aged -> more aged.
inline CellParams apply_aging(const CellParams& pristine, const AgingParams& aging,
                              double fce) {
    if (!(fce >= 0)) throw std::invalid_argument("apply_aging: fce must be >= 0");
    CellParams aged = pristine;
    aged.capacity_ah = pristine.capacity_ah *
                       std::max(0.0, 1.0 - aging.fade_per_fce * fce);
    aged.r0_ohm = pristine.r0_ohm * (1.0 + aging.r0_growth_per_fce * fce);
    return aged;
}

} // namespace pulsesoc
