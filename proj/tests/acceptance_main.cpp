// Acceptance suite: one line per criterion, nonzero exit if any fails.
// Run via ctest (-R acceptance) or directly from the build tree.

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include "pulsesoc/dataset.hpp"
#include "pulsesoc/estimator.hpp"
#include "pulsesoc/execution.hpp"
#include "pulsesoc/model_io.hpp"
#include "pulsesoc/trainer.hpp"

using namespace pulsesoc;

namespace {

int g_failures = 0;

void report(int index, const std::string& name, bool ok, const std::string& detail) {
    std::printf("[%s] %d. %s — %s\n", ok ? "PASS" : "FAIL", index, name.c_str(),
                detail.c_str());
    std::fflush(stdout);
    if (!ok) ++g_failures;
}

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, ...) {
    char buf[512];
    va_list args;
    va_start(args, f);
    std::vsnprintf(buf, sizeof(buf), f, args);
    va_end(args);
    return buf;
}

// ---- criterion 1: gradient correctness ----

double batch_mse(const Network& net, const std::vector<std::vector<double>>& xs,
                 const std::vector<double>& ts) {
    double acc = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double e = net.forward(xs[i]) - ts[i];
        acc += e * e;
    }
    return acc / static_cast<double>(xs.size());
}

double gradient_check(const std::vector<std::size_t>& sizes, std::uint64_t seed) {
    const double h = 1e-5;
    Network net = Network::init(sizes, seed);
    Rng rng(derive_seed(seed, 17));
    std::vector<std::vector<double>> xs;
    std::vector<double> ts;
    for (int s = 0; s < 8; ++s) {
        std::vector<double> x(sizes.front());
        for (double& v : x) v = rng.uniform(-1.0, 1.0);
        xs.push_back(std::move(x));
        ts.push_back(rng.uniform(0.0, 1.0));
    }
    const ParamBlocks grads = backward(net, xs, ts);

    double worst = 0.0;
    auto check_block = [&](std::size_t l, bool weights) {
        auto& param = weights ? net.weights()[l] : net.biases()[l];
        const auto& g = weights ? grads.w[l] : grads.b[l];
        for (std::size_t i = 0; i < param.size(); ++i) {
            const double saved = param[i];
            param[i] = saved + h;
            const double lp = batch_mse(net, xs, ts);
            param[i] = saved - h;
            const double lm = batch_mse(net, xs, ts);
            param[i] = saved;
            const double fd = (lp - lm) / (2.0 * h);
            worst = std::max(worst, std::abs(fd - g[i]) /
                                        std::max({1e-6, std::abs(fd), std::abs(g[i])}));
        }
    };
    for (std::size_t l = 0; l < net.num_layers(); ++l) {
        check_block(l, true);
        check_block(l, false);
    }
    return worst;
}

void criterion_1() {
    const auto t0 = std::chrono::steady_clock::now();
    double worst = 0.0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        worst = std::max(worst, gradient_check({4, 3, 1}, seed));
        worst = std::max(worst, gradient_check({10, 8, 8, 1}, seed));
    }
    const double secs = seconds_since(t0);
    report(1, "gradient correctness vs central differences",
           worst < 1e-4 && secs < 10.0,
           fmt("max relative error %.3g (< 1e-4), %.2f s (< 10 s)", worst, secs));
}

// ---- criterion 2: Adam oracle ----

void criterion_2() {
    // sign-step limit on a 1-D problem with constant gradient
    Network net1 = Network::init({1, 1}, 1);
    AdamState opt1 = AdamState::for_network(net1, 0.001);
    ParamBlocks g1 = net1.zero_like();
    g1.w[0][0] = -0.37;
    double prev = net1.weights()[0][0];
    double delta = 0.0;
    for (int t = 0; t < 100; ++t) {
        adam_step(opt1, net1, g1);
        delta = net1.weights()[0][0] - prev;
        prev = net1.weights()[0][0];
    }
    const double sign_err = std::abs(delta + 0.001 * (g1.w[0][0] > 0 ? 1.0 : -1.0));

    // 2-D quadratic bowl
    Network net2 = Network::init({1, 2, 1}, 1);
    net2.weights()[0] = {1.0, 1.0};
    AdamState opt2 = AdamState::for_network(net2, 0.1);
    for (int t = 0; t < 500; ++t) {
        ParamBlocks g = net2.zero_like();
        g.w[0][0] = 2.0 * net2.weights()[0][0];
        g.w[0][1] = 2.0 * net2.weights()[0][1];
        adam_step(opt2, net2, g);
    }
    const double norm = std::hypot(net2.weights()[0][0], net2.weights()[0][1]);

    report(2, "Adam first-step and quadratic convergence",
           sign_err < 1e-6 && norm < 1e-3,
           fmt("|dw + a*sign(g)| = %.3g (< 1e-6), |w| after 500 steps = %.3g (< 1e-3)",
               sign_err, norm));
}

// ---- criterion 3: headline accuracy ----

SocModel g_pulse_model;  // reused by later criteria
Dataset g_pulse_val;

void criterion_3() {
    const auto t0 = std::chrono::steady_clock::now();
    CellParams params;
    Dataset corpus = dense_corpus(params, {1.0}, dense_default_grid(), 0.001, 42);
    auto [train_set, val_set] = split(corpus, 0.2, 42);

    TrainConfig cfg;  // documented defaults: batch 32, lr 1e-3
    cfg.epochs = 5000;
    cfg.hidden_sizes = {100};
    cfg.seed = 42;
    Network net = Network::init(cfg.layer_sizes(corpus.config.feature_length()),
                                cfg.seed);
    TrainResult res = train(std::move(net), train_set, val_set, cfg);

    double worst_bin = 0.0;
    std::size_t occupied = 0;
    for (const auto& b : evaluate_binned(res.net, val_set, 10))
        if (b.count > 0) {
            ++occupied;
            worst_bin = std::max(worst_bin, b.mean_abs_err_pct);
        }
    const double secs = seconds_since(t0);

    g_pulse_model = SocModel{res.net, corpus.config};
    g_pulse_val = val_set;

    report(3, "headline accuracy on the simulated 1C corpus",
           res.best_val_mae < 0.02 && worst_bin < 2.0 && secs < 900.0,
           fmt("val MAE %.3f%% (< 2%%), worst bin mean |err| %.3f%% over %zu bins "
               "(< 2%%), %.0f s (< 900 s)",
               100.0 * res.best_val_mae, worst_bin, occupied, secs));
}

// ---- criterion 4: plateau/amplitude ordering ----

void criterion_4() {
    CellParams params;
    SweepConfig cfg;
    cfg.amplitudes_c = {0.0, 0.25, 0.5, 1.0};
    cfg.train.epochs = 3000;
    cfg.train.seed = 42;

    const auto points = amplitude_sweep(params, cfg);
    std::vector<double> amps, plateau_errs;
    for (const auto& p : points) {
        amps.push_back(p.amplitude_c);
        plateau_errs.push_back(p.plateau_max_abs_err_pct);
    }
    const double ratio = plateau_errs.front() / plateau_errs.back();
    const double rho = spearman(amps, plateau_errs);

    std::ostringstream tbl;
    for (const auto& p : points)
        tbl << fmt("%.2gC:%.2f%% ", p.amplitude_c, p.plateau_max_abs_err_pct);
    report(4, "plateau error shrinks with pulse amplitude",
           ratio >= 3.0 && rho <= 0.0,
           fmt("plateau max |err| { %s}, ratio 0C/1C = %.1f (>= 3), spearman %.2f (<= 0)",
               tbl.str().c_str(), ratio, rho));
}

// ---- criterion 5: protocol fidelity ----

void criterion_5() {
    CellParams params;
    Schedule sch = build_pulse_train(params);
    auto res = execute(sch, params, CellState::rested(1.0, params));

    int blocks = 0;
    bool currents_ok = true, soc_ok = true;
    double worst_soc_err = 0.0;
    const std::vector<double> expected{0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2};
    for (const auto& run : res.log.runs()) {
        if (run.label.rfind("pulse_", 0) != 0 ||
            run.label.find("_charge") == std::string::npos)
            continue;
        if (blocks < static_cast<int>(expected.size())) {
            const double bp = expected[blocks];
            const double soc_err = std::abs(res.log.soc_true(run.begin) - bp);
            worst_soc_err = std::max(worst_soc_err, soc_err);
            if (soc_err > 0.005) soc_ok = false;
            if (std::abs(res.log.current_a(run.begin) - 3.0) > 1e-9)
                currents_ok = false;
        }
        ++blocks;
    }
    report(5, "pulse-train fidelity (8 blocks, 1C pulses, breakpoint accuracy)",
           blocks == 8 && currents_ok && soc_ok,
           fmt("%d blocks, pulse current 3.0 A, worst breakpoint error %.4f%% SoC "
               "(< 0.5%%)",
               blocks, 100.0 * worst_soc_err));
}

// ---- criterion 6: capacity check accuracy ----

void criterion_6() {
    CellParams params;
    auto res = execute(build_capacity_check(params), params,
                       CellState::rested(1.0, params));
    const double cap = measure_capacity(res.log, "discharge");
    const double rel = std::abs(cap - params.capacity_ah) / params.capacity_ah;
    report(6, "0.1C capacity check recovers the true capacity",
           rel < 0.01,
           fmt("measured %.4f Ah vs %.1f Ah, error %.2f%% (< 1%%)", cap,
               params.capacity_ah, 100.0 * rel));
}

// ---- criterion 7: aging termination ----

void criterion_7() {
    CellParams params;
    AgingParams aging;  // 0.5%/FCE
    FullProcedureOptions opts;
    opts.keep_capacity_logs = false;
    auto res = full_procedure(params, aging, {}, 0.8, opts);
    const auto cycles = res.total_aging_cycles;
    const double final_ratio =
        res.iterations.back().capacity_ah / res.original_capacity_ah;
    report(7, "full procedure terminates at 80% capacity",
           final_ratio <= 0.8 && cycles >= 37 && cycles <= 43,
           fmt("terminated at %.1f%% of original after %zu aging cycles (40 +/- 3)",
               100.0 * final_ratio, cycles));
}

// ---- criterion 8: drive-cycle reset benefit ----

void criterion_8() {
    CellParams params;
    FeatureConfig cfg;
    cfg.charge_pulse_s = 10.0;
    cfg.inter_rest_s = 5.0;
    cfg.discharge_pulse_s = 10.0;

    Dataset corpus = dense_corpus(params, {1.0}, dense_default_grid(), 0.001, 42, cfg);
    auto [train_set, val_set] = split(corpus, 0.2, 42);
    TrainConfig tc;
    tc.epochs = 5000;
    tc.hidden_sizes = {100};
    tc.seed = 42;
    Network net = Network::init(tc.layer_sizes(corpus.config.feature_length()),
                                tc.seed);
    TrainResult tr = train(std::move(net), train_set, val_set, tc);
    double val_max = 0.0;
    for (const auto& s : val_set.samples)
        val_max = std::max(val_max, std::abs(tr.net.forward(s.features) - s.soc_label));

    SocModel model{tr.net, corpus.config};
    DriveProfile profile = generate_drive_profile(1234, 3600.0, params);
    SensorModel sensor;
    sensor.current_bias_a = 0.05;
    sensor.current_noise_sigma_a = 0.01;
    sensor.voltage_noise_sigma_v = 0.001;

    ResetPolicy with_resets;
    ResetPolicy baseline;
    baseline.enable_resets = false;

    auto reset_run = run_drive_cycle(params, CellState::rested(0.85, params),
                                     profile, sensor, cfg, inference_from(model),
                                     with_resets, 7);
    auto coulomb_run = run_drive_cycle(params, CellState::rested(0.85, params),
                                       profile, sensor, cfg, nullptr, baseline, 7);
    const TraceSummary with_sum = summarize(reset_run);
    const TraceSummary without_sum = summarize(coulomb_run);

    double worst_post = 0.0;
    for (const auto& ev : reset_run.resets)
        worst_post = std::max(worst_post, std::abs(ev.post_estimate - ev.soc_true));
    const double bound = val_max + 0.005;

    report(8, "stop-triggered resets beat pure coulomb counting",
           with_sum.max_abs_err < without_sum.max_abs_err && worst_post <= bound &&
               !reset_run.resets.empty(),
           fmt("max |err| %.3f%% with %zu resets vs %.3f%% without; worst post-reset "
               "%.3f%% <= bound %.3f%%",
               100.0 * with_sum.max_abs_err, reset_run.resets.size(),
               100.0 * without_sum.max_abs_err, 100.0 * worst_post, 100.0 * bound));
}

// ---- criterion 9: determinism of emitted artifacts ----

void criterion_9() {
    CellParams params;
    bool ok = true;
    std::string failed;

    {  // protocol log CSV
        ExecutionOptions exec;
        exec.seed = 5;
        auto a = execute(build_capacity_check(params, 30.0), params,
                         CellState::rested(1.0, params), exec);
        auto b = execute(build_capacity_check(params, 30.0), params,
                         CellState::rested(1.0, params), exec);
        std::ostringstream sa, sb;
        write_phase_log_csv(a.log, sa);
        write_phase_log_csv(b.log, sb);
        if (sa.str() != sb.str()) { ok = false; failed += "phase-log "; }
    }
    {  // dataset JSONL
        std::vector<double> grid;
        for (int k = 0; k < 20; ++k) grid.push_back(0.15 + 0.035 * k);
        Dataset a = dense_corpus(params, {1.0}, grid, 0.001, 42);
        Dataset b = dense_corpus(params, {1.0}, grid, 0.001, 42);
        std::ostringstream sa, sb;
        write_dataset_jsonl(a, sa);
        write_dataset_jsonl(b, sb);
        if (sa.str() != sb.str()) { ok = false; failed += "dataset "; }
    }
    {  // training history CSV + model JSON
        std::vector<double> grid;
        for (int k = 0; k < 24; ++k) grid.push_back(0.15 + 0.03 * k);
        FeatureConfig fc;
        fc.charge_pulse_s = 10.0;
        fc.inter_rest_s = 5.0;
        fc.discharge_pulse_s = 10.0;
        Dataset ds = dense_corpus(params, {1.0}, grid, 0.001, 9, fc);
        auto [tr_set, va_set] = split(ds, 0.25, 9);
        TrainConfig tc;
        tc.epochs = 150;
        tc.hidden_sizes = {12};
        tc.seed = 9;
        auto run_once = [&] {
            Network net = Network::init(tc.layer_sizes(ds.config.feature_length()),
                                        tc.seed);
            TrainResult res = train(std::move(net), tr_set, va_set, tc);
            std::ostringstream hist;
            write_history_csv(res.history, hist);
            return hist.str() + to_json(SocModel{res.net, ds.config}).dump();
        };
        if (run_once() != run_once()) { ok = false; failed += "training "; }
    }
    {  // drive trace CSV
        DriveProfile profile = generate_drive_profile(11, 900.0, params);
        SensorModel sensor;
        sensor.current_bias_a = 0.03;
        sensor.current_noise_sigma_a = 0.02;
        sensor.voltage_noise_sigma_v = 0.001;
        FeatureConfig fc;
        fc.charge_pulse_s = 10.0;
        fc.inter_rest_s = 5.0;
        fc.discharge_pulse_s = 10.0;
        InferenceFn stub = [](const std::vector<double>& f, const ResetContext&) {
            return f[0];
        };
        auto run_once = [&] {
            auto trace = run_drive_cycle(params, CellState::rested(0.8, params),
                                         profile, sensor, fc, stub, ResetPolicy{}, 33);
            std::ostringstream out;
            write_trace_csv(trace, out);
            write_resets_csv(trace, out);
            return out.str();
        };
        if (run_once() != run_once()) { ok = false; failed += "drive "; }
    }
    report(9, "identical seeds give byte-identical artifacts",
           ok, ok ? "phase-log, dataset, training, drive outputs all byte-equal"
                  : ("mismatch in: " + failed));
}

} // namespace

int main() {
    const auto t0 = std::chrono::steady_clock::now();
    criterion_1();
    criterion_2();
    criterion_3();
    criterion_4();
    criterion_5();
    criterion_6();
    criterion_7();
    criterion_8();
    criterion_9();
    std::printf("%s — %d/9 criteria passed in %.0f s\n",
                g_failures == 0 ? "ACCEPTANCE PASSED" : "ACCEPTANCE FAILED",
                9 - g_failures, seconds_since(t0));
    return g_failures == 0 ? 0 : 1;
}
