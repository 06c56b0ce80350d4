#pragma once

#include <cstdint>
#include <random>

namespace ohmsim {

// Splittable seeded randomness. One root seed per experiment; every
// stochastic stage derives an independent stream from (seed, stream id),
// so runs are bit-reproducible and trials can be re-ordered or run
// concurrently without perturbing each other.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed, std::uint64_t stream = 0)
        : seed_(seed), engine_(mix(seed, stream)) {}

    // Independent child stream; deterministic in (root seed, id).
    RngStream split(std::uint64_t id) const { return RngStream(seed_, id); }

    double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }

    double uniform(double lo, double hi) {
        return std::uniform_real_distribution<double>(lo, hi)(engine_);
    }

    // Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) {
        return std::uniform_int_distribution<std::uint64_t>(0, n - 1)(engine_);
    }

    bool bernoulli(double p) { return uniform() < p; }

    // Samples an index from unnormalized nonnegative weights.
    template <class Weights>
    int categorical(const Weights& w) {
        double total = 0.0;
        for (double x : w) total += x;
        double u = uniform() * total;
        double acc = 0.0;
        int last = 0;
        int k = 0;
        for (double x : w) {
            acc += x;
            if (u < acc) return k;
            last = k;
            ++k;
        }
        return last;  // u landed on total from rounding
    }

    std::mt19937_64& engine() { return engine_; }

private:
    // splitmix64 finalizer; decorrelates (seed, stream) pairs.
    static std::uint64_t mix(std::uint64_t seed, std::uint64_t stream) {
        std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (2 * stream + 1);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::uint64_t seed_;
    std::mt19937_64 engine_;
};

}  // namespace ohmsim
