#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "pulsesoc/random.hpp"

namespace pulsesoc {

// Error metrics over a batch of scalar estimates. Values are SoC fractions;
// multiply by 100 for percent.
struct Metrics {
    double mae = 0.0;
    double mse = 0.0;
    double rmse = 0.0;
};

inline Metrics loss(std::span<const double> estimates, std::span<const double> targets) {
    if (estimates.size() != targets.size() || estimates.empty())
        throw std::invalid_argument("loss: need equal, non-empty inputs");
    Metrics m;
    for (std::size_t i = 0; i < estimates.size(); ++i) {
        const double e = estimates[i] - targets[i];
        m.mae += std::abs(e);
        m.mse += e * e;
    }
    m.mae /= static_cast<double>(estimates.size());
    m.mse /= static_cast<double>(estimates.size());
    m.rmse = std::sqrt(m.mse);
    return m;
}

// Per-parameter buffers shaped like the network (one flat block of weights
// and one of biases per layer).
struct ParamBlocks {
    std::vector<std::vector<double>> w;
    std::vector<std::vector<double>> b;
};

// Fully connected feedforward network: ReLU hidden layers, linear scalar
// output. Weights for layer l are stored row-major, n_l x n_{l-1}.
class Network {
public:
    // Glorot-uniform weights, zero biases, deterministic per seed.
    static Network init(const std::vector<std::size_t>& layer_sizes,
                        std::uint64_t seed) {
        if (layer_sizes.size() < 2)
            throw std::invalid_argument("Network: need input and output layers");
        for (std::size_t n : layer_sizes)
            if (n == 0) throw std::invalid_argument("Network: zero-width layer");
        if (layer_sizes.back() != 1)
            throw std::invalid_argument("Network: output width must be 1");

        Network net;
        net.sizes_ = layer_sizes;
        Rng rng(seed);
        for (std::size_t l = 1; l < layer_sizes.size(); ++l) {
            const std::size_t n_in = layer_sizes[l - 1];
            const std::size_t n_out = layer_sizes[l];
            const double limit = std::sqrt(6.0 / static_cast<double>(n_in + n_out));
            std::vector<double> w(n_in * n_out);
            for (double& x : w) x = rng.uniform(-limit, limit);
            net.weights_.push_back(std::move(w));
            net.biases_.emplace_back(n_out, 0.0);
        }
        return net;
    }

    const std::vector<std::size_t>& layer_sizes() const { return sizes_; }
    std::size_t input_size() const { return sizes_.front(); }
    std::size_t num_layers() const { return weights_.size(); }

    std::vector<std::vector<double>>& weights() { return weights_; }
    std::vector<std::vector<double>>& biases() { return biases_; }
    const std::vector<std::vector<double>>& weights() const { return weights_; }
    const std::vector<std::vector<double>>& biases() const { return biases_; }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (std::size_t l = 0; l < weights_.size(); ++l)
            n += weights_[l].size() + biases_[l].size();
        return n;
    }

    double forward(std::span<const double> x) const {
        if (x.size() != sizes_.front())
            throw std::invalid_argument("forward: input size mismatch");
        std::vector<double> cur(x.begin(), x.end());
        std::vector<double> next;
        for (std::size_t l = 0; l < weights_.size(); ++l) {
            affine(l, cur, next);
            if (l + 1 < weights_.size())
                for (double& v : next) v = v > 0.0 ? v : 0.0;
            std::swap(cur, next);
        }
        return cur[0];
    }

    // Forward pass keeping post-activation values of every layer (input
    // included) for backpropagation.
    struct Cache {
        std::vector<std::vector<double>> activations;  // [0]=input, ..., [L]=output
    };

    double forward_cached(std::span<const double> x, Cache& cache) const {
        if (x.size() != sizes_.front())
            throw std::invalid_argument("forward: input size mismatch");
        cache.activations.assign(weights_.size() + 1, {});
        cache.activations[0].assign(x.begin(), x.end());
        for (std::size_t l = 0; l < weights_.size(); ++l) {
            affine(l, cache.activations[l], cache.activations[l + 1]);
            if (l + 1 < weights_.size())
                for (double& v : cache.activations[l + 1]) v = v > 0.0 ? v : 0.0;
        }
        return cache.activations.back()[0];
    }

    ParamBlocks zero_like() const {
        ParamBlocks g;
        for (std::size_t l = 0; l < weights_.size(); ++l) {
            g.w.emplace_back(weights_[l].size(), 0.0);
            g.b.emplace_back(biases_[l].size(), 0.0);
        }
        return g;
    }

    bool finite() const {
        for (const auto& w : weights_)
            for (double v : w)
                if (!std::isfinite(v)) return false;
        for (const auto& b : biases_)
            for (double v : b)
                if (!std::isfinite(v)) return false;
        return true;
    }

private:
    void affine(std::size_t l, const std::vector<double>& in,
                std::vector<double>& out) const {
        const std::size_t n_in = sizes_[l];
        const std::size_t n_out = sizes_[l + 1];
        const double* w = weights_[l].data();
        out.assign(biases_[l].begin(), biases_[l].end());
        for (std::size_t j = 0; j < n_out; ++j) {
            const double* row = w + j * n_in;
            double acc = out[j];
            for (std::size_t k = 0; k < n_in; ++k) acc += row[k] * in[k];
            out[j] = acc;
        }
    }

    std::vector<std::size_t> sizes_;
    std::vector<std::vector<double>> weights_;
    std::vector<std::vector<double>> biases_;
};

// Exact mean-squared-error gradients over a batch via reverse-mode chain
// rule. The ReLU subgradient at exactly zero is taken as zero. Samples are
// accumulated in index order so results are bit-reproducible.
inline ParamBlocks backward(const Network& net,
                            const std::vector<std::vector<double>>& inputs,
                            const std::vector<double>& targets) {
    if (inputs.empty() || inputs.size() != targets.size())
        throw std::invalid_argument("backward: need equal, non-empty batch");

    ParamBlocks grads = net.zero_like();
    const auto& sizes = net.layer_sizes();
    const std::size_t L = net.num_layers();
    const double inv_b = 1.0 / static_cast<double>(inputs.size());

    Network::Cache cache;
    std::vector<double> delta, delta_prev;
    for (std::size_t s = 0; s < inputs.size(); ++s) {
        const double y = net.forward_cached(inputs[s], cache);
        // d(mean squared error)/dy for this sample
        delta.assign(1, 2.0 * (y - targets[s]) * inv_b);

        for (std::size_t l = L; l-- > 0;) {
            const std::size_t n_in = sizes[l];
            const std::size_t n_out = sizes[l + 1];
            const std::vector<double>& a_prev = cache.activations[l];
            double* gw = grads.w[l].data();
            double* gb = grads.b[l].data();
            for (std::size_t j = 0; j < n_out; ++j) {
                const double d = delta[j];
                if (d == 0.0) continue;
                gb[j] += d;
                double* grow = gw + j * n_in;
                for (std::size_t k = 0; k < n_in; ++k) grow[k] += d * a_prev[k];
            }
            if (l == 0) break;
            // propagate through the weights, then through the previous
            // layer's ReLU (activation == 0 means gradient 0 there)
            delta_prev.assign(n_in, 0.0);
            const double* w = net.weights()[l].data();
            for (std::size_t j = 0; j < n_out; ++j) {
                const double d = delta[j];
                if (d == 0.0) continue;
                const double* row = w + j * n_in;
                for (std::size_t k = 0; k < n_in; ++k) delta_prev[k] += d * row[k];
            }
            for (std::size_t k = 0; k < n_in; ++k)
                if (a_prev[k] <= 0.0) delta_prev[k] = 0.0;
            std::swap(delta, delta_prev);
        }
    }
    return grads;
}

} // namespace pulsesoc
