#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <fstream>

#include "pulsesoc/cell.hpp"
#include "pulsesoc/cell_config.hpp"
#include "pulsesoc/random.hpp"

using namespace pulsesoc;

namespace {

CellParams flat_resistance_params() {
    CellParams p;
    p.r_soc_slope = 0.0;
    return p;
}

} // namespace

TEST_CASE("default OCV curve endpoints and plateau") {
    CellParams p;
    CHECK(ocv(p, 0.0) == Catch::Approx(2.5).margin(1e-12));
    CHECK(ocv(p, 1.0) == Catch::Approx(4.2).margin(1e-12));
    CHECK(ocv(p, 0.10) == ocv(p, 0.40));
    CHECK(ocv(p, 0.10) == Catch::Approx(3.45).margin(1e-12));
    CHECK(ocv(p, 0.05) == Catch::Approx(3.45).margin(1e-12));

    // closed form on the upper branch: 3.45 + 0.75 * ((s - 0.4) / 0.6)^2
    const double s = 0.70;
    const double u = (s - 0.40) / 0.60;
    const double expected = 3.45 + 0.75 * u * u;  // = 3.6375
    CHECK(ocv(p, 0.70) == Catch::Approx(expected).epsilon(1e-14));
    CHECK(expected == Catch::Approx(3.6375).margin(1e-12));

    CHECK_THROWS_AS(ocv(p, -0.01), std::domain_error);
    CHECK_THROWS_AS(ocv(p, 1.01), std::domain_error);
}

TEST_CASE("OCV curve is non-decreasing") {
    CellParams p;
    Rng rng(7);
    for (int i = 0; i < 2000; ++i) {
        double a = rng.uniform01();
        double b = rng.uniform01();
        if (a > b) std::swap(a, b);
        CHECK(ocv(p, a) <= ocv(p, b));
    }
}

TEST_CASE("OCV breakpoint table") {
    auto curve = OcvCurve::from_table({{0.0, 2.5}, {0.5, 4.1}, {1.0, 4.2}});
    CHECK(curve(0.25) == Catch::Approx(3.3));
    CHECK(curve(0.5) == Catch::Approx(4.1));
    CHECK(curve(0.75) == Catch::Approx(4.15));

    CHECK_THROWS_AS(OcvCurve::from_table({{0.0, 2.5}}), std::invalid_argument);
    CHECK_THROWS_AS(OcvCurve::from_table({{0.0, 2.5}, {0.5, 2.4}, {1.0, 4.2}}),
                    std::invalid_argument);  // voltage dip
    CHECK_THROWS_AS(OcvCurve::from_table({{0.1, 2.5}, {1.0, 4.2}}),
                    std::invalid_argument);  // does not span
    CHECK_THROWS_AS(OcvCurve::from_table({{0.0, 2.5}, {0.5, 3.0}, {0.5, 3.1}, {1.0, 4.2}}),
                    std::invalid_argument);  // duplicate soc
}

TEST_CASE("step: zero current leaves the cell alone") {
    CellParams p;
    CellState s = CellState::rested(0.63, p);
    double v = 0.0;
    CellState next = step(s, p, 0.0, 5.0, &v);
    CHECK(next.soc == s.soc);
    CHECK(v == Catch::Approx(ocv(p, s.soc)).margin(1e-12));
    CHECK(next.v_rc[0] == 0.0);
    CHECK(next.v_rc[1] == 0.0);
}

TEST_CASE("step: 1C discharge for half an hour moves SoC by one half") {
    CellParams p;  // eta_discharge defaults to 1
    CellState s = CellState::rested(1.0, p);
    s = step(s, p, -3.0, 1800.0);
    CHECK(s.soc == Catch::Approx(0.5).margin(1e-12));
    CHECK(s.throughput_ah == Catch::Approx(1.5).margin(1e-12));
    CHECK(s.fce == Catch::Approx(0.25).margin(1e-12));
}

TEST_CASE("step: closed-form RC response") {
    CellParams p = flat_resistance_params();
    p.rc_pairs = {{0.01, 1000.0}};  // tau = 10 s
    CellState s = CellState::rested(0.5, p);
    s = step(s, p, 1.0, 10.0);
    const double expected = 0.01 * (1.0 - std::exp(-1.0));
    CHECK(s.v_rc[0] == Catch::Approx(expected).epsilon(1e-14));
}

TEST_CASE("step: exact discretization composes") {
    // constant-parameter ECM: one step of dt must equal two steps of dt/2
    CellParams p = flat_resistance_params();
    CellState s = CellState::rested(0.7, p);
    s.v_rc = {0.004, -0.002};

    CellState full = step(s, p, -2.4, 8.0);
    CellState half = step(s, p, -2.4, 4.0);
    half = step(half, p, -2.4, 4.0);

    CHECK(half.soc == Catch::Approx(full.soc).margin(1e-15));
    for (int i = 0; i < 2; ++i)
        CHECK(half.v_rc[i] == Catch::Approx(full.v_rc[i]).margin(1e-15));
}

TEST_CASE("step: charge conservation over a random profile") {
    CellParams p;
    p.eta_charge = 1.0;
    p.eta_discharge = 1.0;
    CellState s = CellState::rested(0.5, p);
    Rng rng(11);
    double integral = 0.0;
    for (int i = 0; i < 500; ++i) {
        const double cur = rng.uniform(-2.0, 2.0);
        const double dt = rng.uniform(0.05, 2.0);
        integral += cur * dt / (3600.0 * p.capacity_ah);
        s = step(s, p, cur, dt);
    }
    CHECK(s.soc == Catch::Approx(0.5 + integral).epsilon(1e-9));
    CHECK_FALSE(s.soc_clamped);
}

TEST_CASE("step: SoC clamps with a sticky flag") {
    CellParams p;
    CellState s = CellState::rested(0.999, p);
    s = step(s, p, 4.0, 600.0);
    CHECK(s.soc == 1.0);
    CHECK(s.soc_clamped);
    s = step(s, p, 0.0, 1.0);
    CHECK(s.soc_clamped);  // stays set
}

TEST_CASE("step: over-rating current is flagged, not rejected") {
    CellParams p;
    CellState s = CellState::rested(0.5, p);
    s = step(s, p, -20.0, 0.1);  // beyond the 15 A discharge rating
    CHECK(s.over_current);
    CellState ok = CellState::rested(0.5, p);
    ok = step(ok, p, -10.0, 0.1);
    CHECK_FALSE(ok.over_current);
}

TEST_CASE("zero-current invariance: rested terminal approaches OCV") {
    CellParams p;
    CellState s = CellState::rested(0.55, p);
    // excite the RC states with a 1C pulse, then rest well past max tau
    for (int i = 0; i < 600; ++i) s = step(s, p, 3.0, 0.1);
    double tau_max = 0.0;
    for (const auto& rc : p.rc_pairs)
        tau_max = std::max(tau_max, rc.r_ohm * p.r_scale(0.0) * rc.c_f);
    const double rest_s = 8.0 * tau_max;
    for (double t = 0.0; t < rest_s; t += 1.0) s = step(s, p, 0.0, 1.0);
    CHECK(std::abs(terminal_voltage(s, p, 0.0) - ocv(p, s.soc)) < 1e-3);
}

TEST_CASE("cv_current solves the series drop") {
    CellParams p = flat_resistance_params();
    p.ocv_curve = OcvCurve::from_table({{0.0, 2.5}, {0.5, 4.1}, {1.0, 4.2}});
    p.rc_pairs = {{0.01, 1000.0}};
    p.r0_ohm = 0.05;
    CellState s = CellState::rested(0.5, p);  // ocv = 4.1

    SECTION("already at setpoint") {
        p.ocv_curve = OcvCurve::from_table({{0.0, 2.5}, {0.5, 4.2}, {1.0, 4.2}});
        CHECK(cv_current(s, p, 4.2) == Catch::Approx(0.0).margin(1e-12));
    }
    SECTION("linear solve") {
        s.v_rc = {0.05};
        CHECK(cv_current(s, p, 4.2) == Catch::Approx(1.0).epsilon(1e-12));
    }
    SECTION("clamped to the charge limit") {
        p.r0_ohm = 0.005;
        s.v_rc = {0.0};
        // unclamped solve would be 20 A
        CHECK(cv_current(s, p, 4.2) == Catch::Approx(p.i_max_charge_a));
    }
    SECTION("zero r0 is singular") {
        p.r0_ohm = 0.0;
        CHECK_THROWS(cv_current(s, p, 4.2));
    }
}

TEST_CASE("apply_aging") {
    CellParams p;
    AgingParams aging;  // 0.5%/FCE fade, 1%/FCE r0 growth

    SECTION("identity at zero cycles") {
        CellParams aged = apply_aging(p, aging, 0.0);
        CHECK(aged.capacity_ah == p.capacity_ah);
        CHECK(aged.r0_ohm == p.r0_ohm);
    }
    SECTION("linear fade reaches 80% at 40 FCE") {
        CellParams aged = apply_aging(p, aging, 40.0);
        CHECK(aged.capacity_ah == Catch::Approx(0.80 * p.capacity_ah).epsilon(1e-12));
    }
    SECTION("r0 grows 10% over 10 FCE") {
        CellParams aged = apply_aging(p, aging, 10.0);
        CHECK(aged.r0_ohm == Catch::Approx(1.10 * p.r0_ohm).epsilon(1e-12));
    }
    SECTION("always derived from pristine values") {
        CellParams once = apply_aging(p, aging, 20.0);
        CellParams direct = apply_aging(p, aging, 20.0);
        CHECK(once.capacity_ah == direct.capacity_ah);
    }
    SECTION("monotone in fce") {
        double prev_cap = p.capacity_ah + 1.0;
        double prev_r0 = -1.0;
        for (double fce = 0.0; fce <= 300.0; fce += 7.5) {
            CellParams aged = apply_aging(p, aging, fce);
            CHECK(aged.capacity_ah <= prev_cap);
            CHECK(aged.r0_ohm >= prev_r0);
            prev_cap = aged.capacity_ah;
            prev_r0 = aged.r0_ohm;
        }
    }
}

TEST_CASE("resistance grows as the cell depletes") {
    CellParams p;
    CHECK(p.r_scale(1.0) == Catch::Approx(1.0));
    CHECK(p.r_scale(0.0) == Catch::Approx(1.0 + p.r_soc_slope));
    CHECK(p.r_scale(0.4) > p.r_scale(0.8));
}

TEST_CASE("params validation catches bad inputs") {
    CellParams p;
    p.capacity_ah = -1.0;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
    p = CellParams{};
    p.eta_charge = 1.5;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
    p = CellParams{};
    p.rc_pairs = {{-0.01, 100.0}};
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
}

TEST_CASE("cell config file round trip") {
    const std::string path = "test_cell_config.conf";
    {
        std::ofstream out(path);
        out << "# test cell\n"
            << "capacity_ah = 2.5\n"
            << "r0_ohm = 0.03\n"
            << "rc1_r_ohm = 0.01\n"
            << "rc1_c_f = 2000\n"
            << "eta_charge = 0.98\n"
            << "fade_per_fce = 0.004\n"
            << "r_soc_slope = 0.25\n";
    }
    CellConfig cfg = load_cell_config(path);
    CHECK(cfg.cell.capacity_ah == Catch::Approx(2.5));
    CHECK(cfg.cell.r0_ohm == Catch::Approx(0.03));
    REQUIRE(cfg.cell.rc_pairs.size() == 1);
    CHECK(cfg.cell.rc_pairs[0].c_f == Catch::Approx(2000.0));
    CHECK(cfg.cell.eta_charge == Catch::Approx(0.98));
    CHECK(cfg.aging.fade_per_fce == Catch::Approx(0.004));
    CHECK(cfg.cell.r_soc_slope == Catch::Approx(0.25));
    std::remove(path.c_str());
}

TEST_CASE("cell config rejects unknown keys with a line number") {
    const std::string path = "test_cell_config_bad.conf";
    {
        std::ofstream out(path);
        out << "capacity_ah = 3.0\n"
            << "capactiy_ah = 3.0\n";  // typo
    }
    try {
        load_cell_config(path);
        FAIL("expected an error");
    } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
    std::remove(path.c_str());
}

TEST_CASE("OCV table file override") {
    const std::string tbl = "test_ocv_table.csv";
    {
        std::ofstream out(tbl);
        out << "# soc,volts\n0.0,2.5\n0.5,3.6\n1.0,4.2\n";
    }
    const std::string path = "test_cell_config_tbl.conf";
    {
        std::ofstream out(path);
        out << "ocv_table = " << tbl << "\n";
    }
    CellConfig cfg = load_cell_config(path);
    CHECK(cfg.cell.ocv_curve(0.25) == Catch::Approx(3.05));
    std::remove(path.c_str());
    std::remove(tbl.c_str());
}
