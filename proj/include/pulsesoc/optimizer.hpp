#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>

#include "pulsesoc/network.hpp"

namespace pulsesoc {

// Adam with the usual decay rates. First/second moments are kept per
// parameter; the step counter drives bias correction and increments once
// per call.
struct AdamState {
    double alpha = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double kappa = 1e-8;
    std::uint64_t step_count = 0;
    ParamBlocks m;  // first moment
    ParamBlocks r;  // second moment

    static AdamState for_network(const Network& net, double alpha = 1e-3) {
        AdamState st;
        st.alpha = alpha;
        st.m = net.zero_like();
        st.r = net.zero_like();
        return st;
    }
};

inline void adam_step(AdamState& opt, Network& net, const ParamBlocks& grads) {
    if (opt.m.w.size() != net.num_layers() || grads.w.size() != net.num_layers())
        throw std::invalid_argument("adam_step: shape mismatch");
    if (opt.step_count == std::numeric_limits<std::uint64_t>::max())
        throw std::overflow_error("adam_step: step counter overflow");
    ++opt.step_count;

    const double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(opt.step_count));
    const double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(opt.step_count));

    auto update = [&](std::vector<double>& p, std::vector<double>& m,
                      std::vector<double>& r, const std::vector<double>& g) {
        if (p.size() != g.size())
            throw std::invalid_argument("adam_step: gradient shape mismatch");
        for (std::size_t i = 0; i < p.size(); ++i) {
            m[i] = opt.beta1 * m[i] + (1.0 - opt.beta1) * g[i];
            r[i] = opt.beta2 * r[i] + (1.0 - opt.beta2) * g[i] * g[i];
            const double m_hat = m[i] / bc1;
            const double r_hat = r[i] / bc2;
            p[i] -= opt.alpha * m_hat / (std::sqrt(r_hat) + opt.kappa);
        }
    };

    for (std::size_t l = 0; l < net.num_layers(); ++l) {
        update(net.weights()[l], opt.m.w[l], opt.r.w[l], grads.w[l]);
        update(net.biases()[l], opt.m.b[l], opt.r.b[l], grads.b[l]);
    }
}

} // namespace pulsesoc
