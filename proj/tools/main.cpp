// pulsesoc: battery SoC-estimation laboratory CLI.
//
// Subcommands: protocol, dataset, train, eval, sweep, drive. Every command
// writes its artifacts plus a manifest.json into --out; a directory is used
// by at most one run.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "pulsesoc/cell_config.hpp"
#include "pulsesoc/dataset.hpp"
#include "pulsesoc/estimator.hpp"
#include "pulsesoc/execution.hpp"
#include "pulsesoc/manifest.hpp"
#include "pulsesoc/model_io.hpp"
#include "pulsesoc/trainer.hpp"
#include "pulsesoc/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace pulsesoc;

namespace {

struct GlobalOpts {
    std::string config_path;
    std::string out_dir = "out";
    std::uint64_t seed = 42;
    double sample_dt = 0.1;
    double time_compression = 1.0;
    bool force = false;
};

struct RunContext {
    GlobalOpts globals;
    CellConfig cell_cfg;
    RunManifest manifest;
    fs::path out;
    std::chrono::steady_clock::time_point started;

    fs::path path(const std::string& name) {
        manifest.outputs.push_back((out / name).string());
        return out / name;
    }

    void finish() {
        manifest.wall_clock_s = std::chrono::duration<double>(
                                    std::chrono::steady_clock::now() - started)
                                    .count();
        write_manifest(manifest, (out / "manifest.json").string());
    }
};

RunContext open_run(const GlobalOpts& g, const std::string& command,
                    const std::vector<std::string>& argv) {
    RunContext ctx;
    ctx.globals = g;
    ctx.started = std::chrono::steady_clock::now();
    if (!g.config_path.empty()) ctx.cell_cfg = load_cell_config(g.config_path);
    ctx.out = g.out_dir;
    fs::create_directories(ctx.out);
    if (!g.force && fs::exists(ctx.out / "manifest.json"))
        throw std::runtime_error("output directory already holds a run (" +
                                 (ctx.out / "manifest.json").string() +
                                 "); use a fresh --out or pass --force");
    ctx.manifest.command = command;
    ctx.manifest.argv = argv;
    ctx.manifest.seed = g.seed;
    ctx.manifest.config["seed"] = g.seed;
    ctx.manifest.config["sample_dt"] = g.sample_dt;
    ctx.manifest.config["time_compression"] = g.time_compression;
    ctx.manifest.config["config_path"] = g.config_path;
    ctx.manifest.config["cell"] = {
        {"capacity_ah", ctx.cell_cfg.cell.capacity_ah},
        {"r0_ohm", ctx.cell_cfg.cell.r0_ohm},
        {"eta_charge", ctx.cell_cfg.cell.eta_charge},
        {"eta_discharge", ctx.cell_cfg.cell.eta_discharge},
        {"v_min", ctx.cell_cfg.cell.v_min},
        {"v_max", ctx.cell_cfg.cell.v_max},
        {"i_cutoff_a", ctx.cell_cfg.cell.i_cutoff_a},
        {"i_max_charge_a", ctx.cell_cfg.cell.i_max_charge_a},
        {"i_max_discharge_a", ctx.cell_cfg.cell.i_max_discharge_a},
        {"r_soc_slope", ctx.cell_cfg.cell.r_soc_slope},
    };
    json rc = json::array();
    for (const auto& pair : ctx.cell_cfg.cell.rc_pairs)
        rc.push_back({{"r_ohm", pair.r_ohm}, {"c_f", pair.c_f}});
    ctx.manifest.config["cell"]["rc_pairs"] = rc;
    ctx.manifest.config["aging"] = {
        {"fade_per_fce", ctx.cell_cfg.aging.fade_per_fce},
        {"r0_growth_per_fce", ctx.cell_cfg.aging.r0_growth_per_fce}};
    return ctx;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for write: " + path.string());
    out << text;
}

std::vector<double> parse_double_list(const std::string& csv, const char* what) {
    std::vector<double> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            out.push_back(std::stod(item));
        } catch (const std::exception&) {
            throw std::runtime_error(std::string("bad ") + what + " value: " + item);
        }
    }
    if (out.empty()) throw std::runtime_error(std::string("empty ") + what + " list");
    return out;
}

std::vector<double> make_grid(std::size_t points, double lo, double hi) {
    if (points < 2) throw std::runtime_error("grid needs at least 2 points");
    std::vector<double> g;
    g.reserve(points);
    for (std::size_t k = 0; k < points; ++k)
        g.push_back(lo + (hi - lo) * static_cast<double>(k) /
                             static_cast<double>(points - 1));
    return g;
}

FeatureConfig feature_config_from_flags(double pulse_s, double rest_s) {
    FeatureConfig cfg;
    cfg.charge_pulse_s = pulse_s;
    cfg.inter_rest_s = rest_s;
    cfg.discharge_pulse_s = pulse_s;
    cfg.validate();
    return cfg;
}

// ---- protocol ----

int cmd_protocol(RunContext& ctx, const std::string& schedule_name, double soc0,
                 double pulse_c, const std::string& breakpoints_csv,
                 std::size_t aging_cycles, double until) {
    const CellParams& params = ctx.cell_cfg.cell;
    const double tc = ctx.globals.time_compression;
    ExecutionOptions exec;
    exec.sample_dt = ctx.globals.sample_dt;
    exec.seed = ctx.globals.seed;

    ctx.manifest.config["schedule"] = schedule_name;
    ctx.manifest.config["soc0"] = soc0;

    if (schedule_name == "full-procedure") {
        PulseTrainConfig pulse;
        pulse.pulse_c_rate = pulse_c;
        if (!breakpoints_csv.empty())
            pulse.breakpoints = parse_double_list(breakpoints_csv, "breakpoint");
        FullProcedureOptions opts;
        opts.aging_cycles_per_iteration = aging_cycles;
        opts.time_compression = tc;
        opts.exec = exec;
        ctx.manifest.config["until"] = until;
        ctx.manifest.config["aging_cycles_per_iteration"] = aging_cycles;
        ctx.manifest.config["pulse_c_rate"] = pulse_c;

        auto res = full_procedure(params, ctx.cell_cfg.aging, pulse, until, opts);

        std::ostringstream cap;
        cap << "iteration,aging_cycles_before,fce_at_check,capacity_ah\n";
        char buf[128];
        for (const auto& it : res.iterations) {
            std::snprintf(buf, sizeof(buf), "%zu,%zu,%.6f,%.6f\n", it.iteration,
                          it.aging_cycles_before, it.fce_at_check, it.capacity_ah);
            cap << buf;
        }
        write_text(ctx.path("capacities.csv"), cap.str());
        for (const auto& it : res.iterations)
            if (it.capacity_log)
                write_phase_log_csv(*it.capacity_log,
                                    ctx.path("capacity_check_" +
                                             std::to_string(it.iteration) + ".csv")
                                        .string());
        json report{{"original_capacity_ah", res.original_capacity_ah},
                    {"final_capacity_ah", res.iterations.back().capacity_ah},
                    {"iterations", res.iterations.size()},
                    {"total_aging_cycles", res.total_aging_cycles}};
        write_text(ctx.path("report.json"), report.dump(2) + "\n");
        std::cout << "full procedure: " << res.iterations.size() << " iterations, "
                  << res.total_aging_cycles << " aging cycles, capacity "
                  << res.original_capacity_ah << " -> "
                  << res.iterations.back().capacity_ah << " Ah\n";
        ctx.finish();
        return 0;
    }

    Schedule sch;
    if (schedule_name == "capacity-check") {
        sch = build_capacity_check(params, 600.0 / tc);
    } else if (schedule_name == "pulse-train") {
        std::vector<double> bps;
        if (!breakpoints_csv.empty())
            bps = parse_double_list(breakpoints_csv, "breakpoint");
        sch = build_pulse_train(params, bps, pulse_c, 60.0, 60.0, 3600.0 / tc,
                                5400.0 / tc);
        ctx.manifest.config["pulse_c_rate"] = pulse_c;
    } else if (schedule_name == "aging-cycle") {
        sch = build_aging_cycle(params);
    } else {
        throw std::runtime_error("unknown schedule '" + schedule_name +
                                 "' (capacity-check, pulse-train, aging-cycle, "
                                 "full-procedure)");
    }

    write_text(ctx.path("schedule.json"), to_json(sch).dump(2) + "\n");
    auto res = execute(sch, params, CellState::rested(soc0, params), exec);
    write_phase_log_csv(res.log, ctx.path("log.csv").string());

    json report{{"schedule", schedule_name},
                {"samples", res.log.size()},
                {"truncated", res.truncated},
                {"final_soc", res.state.soc},
                {"fce", res.state.fce}};
    if (schedule_name == "capacity-check") {
        const double cap = measure_capacity(res.log, "discharge");
        report["capacity_ah"] = cap;
        std::cout << "measured capacity: " << cap << " Ah\n";
    }
    write_text(ctx.path("report.json"), report.dump(2) + "\n");
    std::cout << "wrote " << res.log.size() << " samples\n";
    ctx.finish();
    return 0;
}

// ---- dataset ----

int cmd_dataset(RunContext& ctx, const std::string& log_path,
                const std::string& amplitudes_csv, std::size_t grid_points,
                double noise_mv, double pulse_s, double rest_s,
                const std::string& cell_id) {
    FeatureConfig fcfg = feature_config_from_flags(pulse_s, rest_s);
    ctx.manifest.config["noise_mv"] = noise_mv;
    ctx.manifest.config["pulse_s"] = pulse_s;
    ctx.manifest.config["rest_s"] = rest_s;

    Dataset ds;
    if (!log_path.empty()) {
        PhaseLog log = read_phase_log_csv_file(log_path, ctx.globals.sample_dt);
        auto extracted =
            extract_pulses(log, fcfg, ctx.cell_cfg.cell.capacity_ah, cell_id);
        ds.config = fcfg;
        ds.samples = std::move(extracted.samples);
        if (extracted.skipped > 0)
            std::cerr << "warning: skipped " << extracted.skipped
                      << " truncated pulse block(s)\n";
        add_noise(ds, noise_mv * 1e-3, derive_seed(ctx.globals.seed, 0));
        ctx.manifest.config["source_log"] = log_path;
    } else {
        const auto amplitudes = parse_double_list(amplitudes_csv, "amplitude");
        const auto grid = grid_points == 161 ? dense_default_grid()
                                             : make_grid(grid_points, 0.1, 0.9);
        ds = dense_corpus(ctx.cell_cfg.cell, amplitudes, grid, noise_mv * 1e-3,
                          ctx.globals.seed, fcfg, ctx.globals.sample_dt);
        ctx.manifest.config["amplitudes_c"] = amplitudes;
        ctx.manifest.config["grid_points"] = grid.size();
    }
    write_dataset_jsonl(ds, ctx.path("dataset.jsonl").string());
    std::cout << "wrote " << ds.size() << " samples (feature length "
              << ds.config.feature_length() << ")\n";
    ctx.finish();
    return 0;
}

// ---- train ----

int cmd_train(RunContext& ctx, const std::string& dataset_path,
              const std::string& hidden_csv, std::size_t epochs,
              std::size_t batch, double lr, double val_fraction) {
    Dataset ds = read_dataset_jsonl_file(dataset_path);
    auto [train_set, val_set] = split(ds, val_fraction, ctx.globals.seed);

    TrainConfig cfg;
    cfg.epochs = epochs;
    cfg.batch_size = batch;
    cfg.learning_rate = lr;
    cfg.seed = ctx.globals.seed;
    cfg.hidden_sizes.clear();
    for (double h : parse_double_list(hidden_csv, "hidden size"))
        cfg.hidden_sizes.push_back(static_cast<std::size_t>(h));

    ctx.manifest.config["dataset"] = dataset_path;
    ctx.manifest.config["epochs"] = epochs;
    ctx.manifest.config["batch_size"] = batch;
    ctx.manifest.config["learning_rate"] = lr;
    ctx.manifest.config["val_fraction"] = val_fraction;
    ctx.manifest.config["hidden_sizes"] = cfg.hidden_sizes;
    ctx.manifest.config["train_samples"] = train_set.size();
    ctx.manifest.config["val_samples"] = val_set.size();

    Network net = Network::init(cfg.layer_sizes(ds.config.feature_length()), cfg.seed);
    TrainResult res = train(std::move(net), train_set, val_set, cfg);

    save_model(SocModel{res.net, ds.config}, ctx.path("model.json").string());
    write_history_csv(res.history, ctx.path("history.csv").string());
    std::cout << "best val MAE " << 100.0 * res.best_val_mae << "% at epoch "
              << res.best_epoch << " (" << res.history.size() << " epochs run)\n";
    ctx.finish();
    return 0;
}

// ---- eval ----

int cmd_eval(RunContext& ctx, const std::string& model_path,
             const std::string& dataset_path, std::size_t bins,
             std::optional<double> assert_mae_below) {
    SocModel model = load_model(model_path);
    Dataset ds = read_dataset_jsonl_file(dataset_path);
    if (!(model.feature_config == ds.config))
        throw std::runtime_error(
            "feature config mismatch between model and dataset; the model was "
            "trained on a different pulse window or normalization");

    ctx.manifest.config["model"] = model_path;
    ctx.manifest.config["dataset"] = dataset_path;
    ctx.manifest.config["bins"] = bins;

    std::vector<double> est, tgt;
    double max_abs = 0.0;
    for (const auto& s : ds.samples) {
        est.push_back(model.predict(s.features));
        tgt.push_back(s.soc_label);
        max_abs = std::max(max_abs, std::abs(est.back() - tgt.back()));
    }
    Metrics m = loss(est, tgt);

    auto bin_stats = evaluate_binned(model.net, ds, bins);
    std::ostringstream binned;
    write_binned_csv(bin_stats, binned);
    write_text(ctx.path("binned.csv"), binned.str());

    json report{{"samples", ds.size()},
                {"mae", m.mae},
                {"rmse", m.rmse},
                {"mae_pct", 100.0 * m.mae},
                {"rmse_pct", 100.0 * m.rmse},
                {"max_abs_err_pct", 100.0 * max_abs}};
    write_text(ctx.path("eval.json"), report.dump(2) + "\n");
    std::cout << "MAE " << 100.0 * m.mae << "%  RMSE " << 100.0 * m.rmse
              << "%  max " << 100.0 * max_abs << "%  (" << ds.size()
              << " samples)\n";
    ctx.finish();

    if (assert_mae_below && !(m.mae < *assert_mae_below)) {
        std::cerr << "MAE " << m.mae << " is not below the required "
                  << *assert_mae_below << "\n";
        return 1;
    }
    return 0;
}

// ---- sweep ----

int cmd_sweep(RunContext& ctx, const std::string& amplitudes_csv,
              std::size_t grid_points, double noise_mv,
              const std::string& hidden_csv, std::size_t epochs, std::size_t batch,
              double lr, double pulse_s, double rest_s) {
    SweepConfig cfg;
    cfg.amplitudes_c = parse_double_list(amplitudes_csv, "amplitude");
    cfg.soc_grid = grid_points == 161 ? dense_default_grid()
                                      : make_grid(grid_points, 0.1, 0.9);
    cfg.noise_sigma_v = noise_mv * 1e-3;
    cfg.sample_dt = ctx.globals.sample_dt;
    cfg.features = feature_config_from_flags(pulse_s, rest_s);
    cfg.train.epochs = epochs;
    cfg.train.batch_size = batch;
    cfg.train.learning_rate = lr;
    cfg.train.seed = ctx.globals.seed;
    cfg.train.hidden_sizes.clear();
    for (double h : parse_double_list(hidden_csv, "hidden size"))
        cfg.train.hidden_sizes.push_back(static_cast<std::size_t>(h));

    ctx.manifest.config["amplitudes_c"] = cfg.amplitudes_c;
    ctx.manifest.config["grid_points"] = cfg.soc_grid.size();
    ctx.manifest.config["noise_mv"] = noise_mv;
    ctx.manifest.config["epochs"] = epochs;
    ctx.manifest.config["hidden_sizes"] = cfg.train.hidden_sizes;

    auto points = amplitude_sweep(ctx.cell_cfg.cell, cfg);

    std::ostringstream sweep_out, detail_out;
    write_sweep_csv(points, sweep_out);
    write_sweep_details_csv(points, detail_out);
    write_text(ctx.path("sweep.csv"), sweep_out.str());
    write_text(ctx.path("sweep_details.csv"), detail_out.str());

    for (const auto& pt : points)
        std::cout << "amplitude " << pt.amplitude_c << " C: max "
                  << pt.max_abs_err_pct << "%  plateau max "
                  << pt.plateau_max_abs_err_pct << "%  val MAE " << pt.val_mae_pct
                  << "%\n";
    ctx.finish();
    return 0;
}

// ---- drive ----

int cmd_drive(RunContext& ctx, const std::string& model_path,
              const std::string& profile_path, double duration_s, double soc0,
              double bias_a, double current_noise_a, double voltage_noise_v,
              double capacity_assumed, const std::string& policy_name,
              double min_stop_s, double cadence_s) {
    SocModel model = load_model(model_path);

    DriveProfile profile;
    if (!profile_path.empty()) {
        std::ifstream in(profile_path);
        if (!in) throw std::runtime_error("cannot open: " + profile_path);
        profile = read_drive_profile_csv(in);
        ctx.manifest.config["profile"] = profile_path;
    } else {
        DriveStyle style;
        style.dt_s = ctx.globals.sample_dt;
        profile = generate_drive_profile(ctx.globals.seed, duration_s,
                                         ctx.cell_cfg.cell, style);
        ctx.manifest.config["duration_s"] = duration_s;
    }

    SensorModel sensor;
    sensor.current_bias_a = bias_a;
    sensor.current_noise_sigma_a = current_noise_a;
    sensor.voltage_noise_sigma_v = voltage_noise_v;
    sensor.capacity_assumed_ah =
        capacity_assumed > 0 ? capacity_assumed : ctx.cell_cfg.cell.capacity_ah;

    ResetPolicy policy;
    if (policy_name == "stop") {
        policy.mode = ResetPolicy::Mode::StopTriggered;
    } else if (policy_name == "continuous") {
        policy.mode = ResetPolicy::Mode::Continuous;
    } else if (policy_name == "none") {
        policy.enable_resets = false;
    } else {
        throw std::runtime_error("unknown policy '" + policy_name +
                                 "' (stop, continuous, none)");
    }
    policy.min_stop_s = min_stop_s;
    policy.continuous_cadence_s = cadence_s;
    policy.eta_charge_assumed = ctx.cell_cfg.cell.eta_charge;
    policy.eta_discharge_assumed = ctx.cell_cfg.cell.eta_discharge;

    ctx.manifest.config["model"] = model_path;
    ctx.manifest.config["policy"] = policy_name;
    ctx.manifest.config["soc0"] = soc0;
    ctx.manifest.config["current_bias_a"] = bias_a;
    ctx.manifest.config["current_noise_sigma_a"] = current_noise_a;
    ctx.manifest.config["voltage_noise_sigma_v"] = voltage_noise_v;
    ctx.manifest.config["capacity_assumed_ah"] = sensor.capacity_assumed_ah;
    ctx.manifest.config["min_stop_s"] = min_stop_s;

    EstimatorTrace trace = run_drive_cycle(
        ctx.cell_cfg.cell, CellState::rested(soc0, ctx.cell_cfg.cell), profile,
        sensor, model.feature_config,
        policy.enable_resets ? inference_from(model) : InferenceFn{}, policy,
        derive_seed(ctx.globals.seed, 1));

    {
        std::ofstream out(ctx.path("trace.csv"));
        write_trace_csv(trace, out);
    }
    {
        std::ofstream out(ctx.path("resets.csv"));
        write_resets_csv(trace, out);
    }
    TraceSummary sum = summarize(trace);
    json report{{"samples", trace.size()},
                {"resets", trace.resets.size()},
                {"skipped_stops", trace.skipped_stops},
                {"max_abs_err", sum.max_abs_err},
                {"mean_abs_err", sum.mean_abs_err},
                {"end_err", sum.end_err},
                {"t_at_max_abs_err", sum.t_at_max_abs_err},
                {"segment_drift_slopes", sum.segment_drift_slopes}};
    write_text(ctx.path("summary.json"), report.dump(2) + "\n");
    std::cout << "max |err| " << 100.0 * sum.max_abs_err << "%  mean "
              << 100.0 * sum.mean_abs_err << "%  resets " << trace.resets.size()
              << "\n";
    ctx.finish();
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"pulse-injection SoC estimation laboratory"};
    app.set_version_flag("--version", std::string(kVersion));
    app.require_subcommand(1);

    GlobalOpts g;
    app.add_option("--config", g.config_path, "cell configuration file");
    app.add_option("--out", g.out_dir, "output directory (one run per directory)");
    app.add_option("--seed", g.seed, "global random seed");
    app.add_option("--sample-dt", g.sample_dt, "cycler sampling period, s");
    app.add_option("--time-compression", g.time_compression,
                   "divide rest durations for faster runs (>= 1)");
    app.add_flag("--force", g.force, "allow writing into a used output directory");

    // protocol
    auto* protocol = app.add_subcommand("protocol", "run a test schedule");
    std::string schedule = "capacity-check";
    double soc0 = 1.0, pulse_c = 1.0, until = 0.8;
    std::string breakpoints;
    std::size_t aging_cycles = 10;
    protocol->add_option("--schedule", schedule,
                         "capacity-check | pulse-train | aging-cycle | full-procedure");
    protocol->add_option("--soc0", soc0, "initial SoC");
    protocol->add_option("--pulse-c", pulse_c, "pulse amplitude, C-rate");
    protocol->add_option("--breakpoints", breakpoints,
                         "comma-separated SoC breakpoints, decreasing");
    protocol->add_option("--aging-cycles", aging_cycles,
                         "aging cycles per procedure iteration");
    protocol->add_option("--until", until, "end-of-life capacity fraction");

    // dataset
    auto* dataset = app.add_subcommand("dataset", "build a labeled pulse dataset");
    std::string log_path, amplitudes = "1.0", cell_id = "sim";
    std::size_t grid_points = 161;
    double noise_mv = 1.0, pulse_s = 60.0, rest_s = 60.0;
    dataset->add_option("--log", log_path, "extract from a phase-log CSV");
    dataset->add_option("--amplitudes", amplitudes, "pulse amplitudes, C-rate");
    dataset->add_option("--grid-points", grid_points, "dense SoC grid size");
    dataset->add_option("--noise-mv", noise_mv, "voltage sensor noise, mV");
    dataset->add_option("--pulse-s", pulse_s, "pulse duration, s");
    dataset->add_option("--rest-s", rest_s, "inter-pulse rest, s");
    dataset->add_option("--cell-id", cell_id, "cell tag for extracted samples");

    // train
    auto* train_cmd = app.add_subcommand("train", "train an SoC network");
    std::string train_dataset, hidden = "100";
    std::size_t epochs = 5000, batch = 32;
    double lr = 1e-3, val_fraction = 0.2;
    train_cmd->add_option("--dataset", train_dataset, "dataset.jsonl path")
        ->required();
    train_cmd->add_option("--hidden", hidden, "hidden layer sizes, comma separated");
    train_cmd->add_option("--epochs", epochs, "training epochs");
    train_cmd->add_option("--batch", batch, "minibatch size");
    train_cmd->add_option("--lr", lr, "Adam learning rate");
    train_cmd->add_option("--val-fraction", val_fraction, "validation split");

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "evaluate a model on a dataset");
    std::string eval_model, eval_dataset;
    std::size_t bins = 10;
    double assert_mae = -1.0;
    eval_cmd->add_option("--model", eval_model, "model.json path")->required();
    eval_cmd->add_option("--dataset", eval_dataset, "dataset.jsonl path")->required();
    eval_cmd->add_option("--bins", bins, "SoC bins for the error breakdown");
    eval_cmd->add_option("--assert-mae-below", assert_mae,
                         "exit nonzero unless MAE is below this fraction");

    // sweep
    auto* sweep_cmd = app.add_subcommand("sweep", "pulse-amplitude sensitivity sweep");
    std::string sweep_amplitudes = "0,0.25,0.5,1.0", sweep_hidden = "100";
    std::size_t sweep_grid = 161, sweep_epochs = 3000, sweep_batch = 32;
    double sweep_noise_mv = 1.0, sweep_lr = 1e-3;
    double sweep_pulse_s = 60.0, sweep_rest_s = 60.0;
    sweep_cmd->add_option("--amplitudes", sweep_amplitudes, "C-rates, 0 = OCV baseline");
    sweep_cmd->add_option("--grid-points", sweep_grid, "dense SoC grid size");
    sweep_cmd->add_option("--noise-mv", sweep_noise_mv, "voltage noise, mV");
    sweep_cmd->add_option("--hidden", sweep_hidden, "hidden layer sizes");
    sweep_cmd->add_option("--epochs", sweep_epochs, "epochs per sweep point");
    sweep_cmd->add_option("--batch", sweep_batch, "minibatch size");
    sweep_cmd->add_option("--lr", sweep_lr, "Adam learning rate");
    sweep_cmd->add_option("--pulse-s", sweep_pulse_s, "pulse duration, s");
    sweep_cmd->add_option("--rest-s", sweep_rest_s, "inter-pulse rest, s");

    // drive
    auto* drive_cmd = app.add_subcommand("drive", "drive-cycle estimator demo");
    std::string drive_model, drive_profile, policy_name = "stop";
    double duration = 3600.0, drive_soc0 = 0.85, bias = 0.05;
    double current_noise = 0.01, voltage_noise = 0.001, capacity_assumed = -1.0;
    double min_stop = 25.0, cadence = 120.0;
    drive_cmd->add_option("--model", drive_model, "model.json path")->required();
    drive_cmd->add_option("--profile", drive_profile,
                          "external profile CSV (t_s,current_a)");
    drive_cmd->add_option("--duration", duration, "synthetic profile length, s");
    drive_cmd->add_option("--soc0", drive_soc0, "initial SoC");
    drive_cmd->add_option("--bias", bias, "current sensor bias, A");
    drive_cmd->add_option("--current-noise", current_noise, "current noise sigma, A");
    drive_cmd->add_option("--voltage-noise", voltage_noise, "voltage noise sigma, V");
    drive_cmd->add_option("--capacity-assumed", capacity_assumed,
                          "estimator's capacity belief, Ah (default: true value)");
    drive_cmd->add_option("--policy", policy_name, "stop | continuous | none");
    drive_cmd->add_option("--min-stop", min_stop, "shortest stop worth pulsing, s");
    drive_cmd->add_option("--cadence", cadence, "continuous-mode inference period, s");

    CLI11_PARSE(app, argc, argv);

    std::vector<std::string> args(argv, argv + argc);
    try {
        if (protocol->parsed()) {
            auto ctx = open_run(g, "protocol", args);
            return cmd_protocol(ctx, schedule, soc0, pulse_c, breakpoints,
                                aging_cycles, until);
        }
        if (dataset->parsed()) {
            auto ctx = open_run(g, "dataset", args);
            return cmd_dataset(ctx, log_path, amplitudes, grid_points, noise_mv,
                               pulse_s, rest_s, cell_id);
        }
        if (train_cmd->parsed()) {
            auto ctx = open_run(g, "train", args);
            return cmd_train(ctx, train_dataset, hidden, epochs, batch, lr,
                             val_fraction);
        }
        if (eval_cmd->parsed()) {
            auto ctx = open_run(g, "eval", args);
            return cmd_eval(ctx, eval_model, eval_dataset, bins,
                            assert_mae >= 0 ? std::optional<double>(assert_mae)
                                            : std::nullopt);
        }
        if (sweep_cmd->parsed()) {
            auto ctx = open_run(g, "sweep", args);
            return cmd_sweep(ctx, sweep_amplitudes, sweep_grid, sweep_noise_mv,
                             sweep_hidden, sweep_epochs, sweep_batch, sweep_lr,
                             sweep_pulse_s, sweep_rest_s);
        }
        if (drive_cmd->parsed()) {
            auto ctx = open_run(g, "drive", args);
            return cmd_drive(ctx, drive_model, drive_profile, duration, drive_soc0,
                             bias, current_noise, voltage_noise, capacity_assumed,
                             policy_name, min_stop, cadence);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    std::cerr << "error: no subcommand\n";
    return 2;
}
