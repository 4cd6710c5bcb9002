#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "pulsesoc/dataset.hpp"
#include "pulsesoc/network.hpp"
#include "pulsesoc/optimizer.hpp"

namespace pulsesoc {

struct TrainConfig {
    std::size_t epochs = 5000;
    std::size_t batch_size = 32;
    double learning_rate = 1e-3;
    std::uint64_t seed = 42;
    std::vector<std::size_t> hidden_sizes{100};
    std::optional<std::size_t> patience;  // epochs without val-MAE improvement
    bool shuffle_each_epoch = true;

    void validate() const {
        if (epochs < 1) throw std::invalid_argument("TrainConfig: epochs must be >= 1");
        if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
        if (!(learning_rate > 0))
            throw std::invalid_argument("TrainConfig: learning_rate must be > 0");
    }

    std::vector<std::size_t> layer_sizes(std::size_t input) const {
        std::vector<std::size_t> sizes{input};
        sizes.insert(sizes.end(), hidden_sizes.begin(), hidden_sizes.end());
        sizes.push_back(1);
        return sizes;
    }
};

struct EpochMetrics {
    double train_mae, train_rmse, val_mae, val_rmse;
};
using History = std::vector<EpochMetrics>;

struct TrainResult {
    Network net;  // best-validation-MAE snapshot
    History history;
    double best_val_mae = 0.0;
    std::size_t best_epoch = 0;  // 1-based
};

inline Metrics evaluate(const Network& net, const Dataset& ds) {
    std::vector<double> est, tgt;
    est.reserve(ds.size());
    tgt.reserve(ds.size());
    for (const PulseSample& s : ds.samples) {
        est.push_back(net.forward(s.features));
        tgt.push_back(s.soc_label);
    }
    return loss(est, tgt);
}

// Minibatch MSE training with Adam. One seeded shuffle per epoch, batches in
// shuffled order, per-epoch metrics on both sets; returns the snapshot with
// the best validation MAE and the full history. Sequential and bit-
// reproducible for a fixed seed.
inline TrainResult train(Network net, const Dataset& train_set,
                         const Dataset& val_set, const TrainConfig& cfg) {
    cfg.validate();
    if (train_set.samples.empty() || val_set.samples.empty())
        throw std::invalid_argument("train: empty train or validation set");
    if (train_set.config.feature_length() != net.input_size())
        throw std::invalid_argument("train: feature length does not match network input");

    const std::size_t n = train_set.samples.size();
    Rng shuffle_rng(cfg.seed);
    AdamState opt = AdamState::for_network(net, cfg.learning_rate);

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);

    TrainResult result;
    result.best_val_mae = std::numeric_limits<double>::infinity();

    std::vector<std::vector<double>> batch_x;
    std::vector<double> batch_t;

    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        if (cfg.shuffle_each_epoch)
            for (std::size_t i = n - 1; i > 0; --i)
                std::swap(order[i], order[shuffle_rng.index(i + 1)]);

        for (std::size_t start = 0; start < n; start += cfg.batch_size) {
            const std::size_t end = std::min(n, start + cfg.batch_size);
            batch_x.clear();
            batch_t.clear();
            for (std::size_t i = start; i < end; ++i) {
                batch_x.push_back(train_set.samples[order[i]].features);
                batch_t.push_back(train_set.samples[order[i]].soc_label);
            }
            ParamBlocks grads = backward(net, batch_x, batch_t);
            adam_step(opt, net, grads);
        }

        const Metrics tm = evaluate(net, train_set);
        const Metrics vm = evaluate(net, val_set);
        if (!std::isfinite(tm.mse) || !std::isfinite(vm.mse))
            throw std::runtime_error(
                "train: loss became non-finite at epoch " + std::to_string(epoch) +
                "; lower the learning rate or check feature scaling");
        result.history.push_back({tm.mae, tm.rmse, vm.mae, vm.rmse});

        if (vm.mae < result.best_val_mae) {
            result.best_val_mae = vm.mae;
            result.best_epoch = epoch;
            result.net = net;
        }
        if (cfg.patience && epoch >= result.best_epoch + *cfg.patience) break;
    }
    return result;
}

// ---- binned error analysis ----

struct BinStats {
    double lo = 0.0, hi = 0.0;
    std::size_t count = 0;
    double mean_err_pct = 0.0;      // signed, estimate minus truth
    double mean_abs_err_pct = 0.0;
    double max_abs_err_pct = 0.0;
};

inline std::vector<BinStats> evaluate_binned(const Network& net, const Dataset& ds,
                                             std::size_t bins) {
    if (ds.samples.empty()) throw std::invalid_argument("evaluate_binned: empty dataset");
    if (bins == 0) throw std::invalid_argument("evaluate_binned: bins must be > 0");
    std::vector<BinStats> out(bins);
    for (std::size_t b = 0; b < bins; ++b) {
        out[b].lo = static_cast<double>(b) / static_cast<double>(bins);
        out[b].hi = static_cast<double>(b + 1) / static_cast<double>(bins);
    }
    for (const PulseSample& s : ds.samples) {
        std::size_t b = static_cast<std::size_t>(s.soc_label * static_cast<double>(bins));
        b = std::min(b, bins - 1);
        const double err = (net.forward(s.features) - s.soc_label) * 100.0;
        out[b].count += 1;
        out[b].mean_err_pct += err;
        out[b].mean_abs_err_pct += std::abs(err);
        out[b].max_abs_err_pct = std::max(out[b].max_abs_err_pct, std::abs(err));
    }
    for (BinStats& b : out) {
        if (b.count > 0) {
            b.mean_err_pct /= static_cast<double>(b.count);
            b.mean_abs_err_pct /= static_cast<double>(b.count);
        }
    }
    return out;
}

// ---- pulse-amplitude sensitivity sweep ----

struct SweepConfig {
    std::vector<double> amplitudes_c{0.0, 0.25, 0.5, 1.0};
    std::vector<double> soc_grid = dense_default_grid();
    double noise_sigma_v = 0.001;
    double val_fraction = 0.2;
    double sample_dt = 0.1;
    TrainConfig train;
    FeatureConfig features;
    double plateau_lo = 0.10;
    double plateau_hi = 0.40;
};

struct SweepPoint {
    double amplitude_c = 0.0;
    double max_abs_err_pct = 0.0;          // whole validation set
    double plateau_max_abs_err_pct = 0.0;  // labels inside [plateau_lo, plateau_hi]
    double val_mae_pct = 0.0;
};

// For each amplitude: fresh corpus, fresh identically-seeded network, full
// training run, validation errors. Amplitude 0 is the OCV-only baseline.
inline std::vector<SweepPoint> amplitude_sweep(const CellParams& params,
                                               const SweepConfig& cfg) {
    std::vector<SweepPoint> out;
    for (std::size_t ai = 0; ai < cfg.amplitudes_c.size(); ++ai) {
        const double amp = cfg.amplitudes_c[ai];
        Dataset corpus = dense_corpus(params, {amp}, cfg.soc_grid, cfg.noise_sigma_v,
                                      derive_seed(cfg.train.seed, ai), cfg.features,
                                      cfg.sample_dt);
        auto [train_set, val_set] = split(corpus, cfg.val_fraction, cfg.train.seed);
        Network net = Network::init(
            cfg.train.layer_sizes(corpus.config.feature_length()), cfg.train.seed);
        TrainResult res = train(std::move(net), train_set, val_set, cfg.train);

        SweepPoint pt;
        pt.amplitude_c = amp;
        pt.val_mae_pct = res.best_val_mae * 100.0;
        for (const PulseSample& s : val_set.samples) {
            const double err = std::abs(res.net.forward(s.features) - s.soc_label) * 100.0;
            pt.max_abs_err_pct = std::max(pt.max_abs_err_pct, err);
            if (s.soc_label >= cfg.plateau_lo && s.soc_label <= cfg.plateau_hi)
                pt.plateau_max_abs_err_pct = std::max(pt.plateau_max_abs_err_pct, err);
        }
        out.push_back(pt);
    }
    return out;
}

// Spearman rank correlation with average ranks for ties.
inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2)
        throw std::invalid_argument("spearman: need two equal series of length >= 2");
    auto ranks = [](const std::vector<double>& v) {
        const std::size_t n = v.size();
        std::vector<std::size_t> idx(n);
        std::iota(idx.begin(), idx.end(), 0);
        std::sort(idx.begin(), idx.end(),
                  [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
        std::vector<double> r(n);
        std::size_t i = 0;
        while (i < n) {
            std::size_t j = i;
            while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
            const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
            for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
            i = j + 1;
        }
        return r;
    };
    const std::vector<double> rx = ranks(x), ry = ranks(y);
    const double n = static_cast<double>(x.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) { mx += rx[i]; my += ry[i]; }
    mx /= n;
    my /= n;
    double num = 0, dx = 0, dy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        num += (rx[i] - mx) * (ry[i] - my);
        dx += (rx[i] - mx) * (rx[i] - mx);
        dy += (ry[i] - my) * (ry[i] - my);
    }
    if (dx == 0 || dy == 0) return 0.0;
    return num / std::sqrt(dx * dy);
}

// ---- CSV outputs ----

inline void write_history_csv(const History& hist, std::ostream& out) {
    out << "epoch,train_mae,train_rmse,val_mae,val_rmse\n";
    char buf[160];
    for (std::size_t i = 0; i < hist.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%zu,%.9g,%.9g,%.9g,%.9g\n", i + 1,
                      hist[i].train_mae, hist[i].train_rmse, hist[i].val_mae,
                      hist[i].val_rmse);
        out << buf;
    }
}

inline void write_history_csv(const History& hist, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for write: " + path);
    write_history_csv(hist, out);
}

inline void write_sweep_csv(const std::vector<SweepPoint>& pts, std::ostream& out) {
    out << "amplitude_c,max_abs_err_pct\n";
    char buf[96];
    for (const SweepPoint& p : pts) {
        std::snprintf(buf, sizeof(buf), "%.9g,%.9g\n", p.amplitude_c, p.max_abs_err_pct);
        out << buf;
    }
}

inline void write_sweep_details_csv(const std::vector<SweepPoint>& pts,
                                    std::ostream& out) {
    out << "amplitude_c,max_abs_err_pct,plateau_max_abs_err_pct,val_mae_pct\n";
    char buf[144];
    for (const SweepPoint& p : pts) {
        std::snprintf(buf, sizeof(buf), "%.9g,%.9g,%.9g,%.9g\n", p.amplitude_c,
                      p.max_abs_err_pct, p.plateau_max_abs_err_pct, p.val_mae_pct);
        out << buf;
    }
}

inline void write_binned_csv(const std::vector<BinStats>& bins, std::ostream& out) {
    out << "bin_lo,bin_hi,count,mean_err_pct,mean_abs_err_pct,max_abs_err_pct\n";
    char buf[160];
    for (const BinStats& b : bins) {
        std::snprintf(buf, sizeof(buf), "%.3f,%.3f,%zu,%.9g,%.9g,%.9g\n", b.lo, b.hi,
                      b.count, b.mean_err_pct, b.mean_abs_err_pct, b.max_abs_err_pct);
        out << buf;
    }
}

} // namespace pulsesoc
