#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace pulsesoc {

// Deterministic RNG wrapper. std::mt19937_64 output is fully specified by the
// standard, but the standard distributions are not, so the mappings to doubles
// live here. Equal seeds give bit-identical streams on every platform.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    // Uniform in [0, 1) with 53 random bits.
    double uniform01() {
        return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) {
        return lo + (hi - lo) * uniform01();
    }

    // Standard normal via Box-Muller. Consumes two uniforms per draw; the
    // second branch is discarded so the stream layout stays trivial.
    double gaussian() {
        double u1 = uniform01();
        double u2 = uniform01();
        while (u1 <= 0.0) u1 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) *
               std::cos(2.0 * std::numbers::pi * u2);
    }

    double gaussian(double mean, double sigma) {
        return mean + sigma * gaussian();
    }

    // Uniform integer in [0, n), n > 0. Rejection-free modulo is fine here:
    // n is always tiny relative to 2^64 so the bias is unobservable.
    std::size_t index(std::size_t n) {
        return static_cast<std::size_t>(gen_() % n);
    }

private:
    std::mt19937_64 gen_;
};

// Derive an independent child seed from a base seed and a task index, so
// per-task streams stay decoupled from execution order.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
    std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

} // namespace pulsesoc
