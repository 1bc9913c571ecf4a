#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "tensor.hpp"

namespace cocoanet {

// All randomness flows through this wrapper. The core engine is mt19937_64
// (output sequence pinned by the C++ standard) and every distribution on top
// is written out by hand, so a given seed produces the same stream on any
// platform. Substreams are derived with splitmix64 mixing, which keeps
// (seed, epoch, sample) reproducible regardless of batch order.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    // Uniform in [0, 1) with 53 random bits.
    double uniform() {
        return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Unbiased integer in [0, n); rejection keeps it exact for any n.
    std::uint64_t bounded(std::uint64_t n) {
        if (n == 0) return 0;
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x;
        do {
            x = gen_();
        } while (x >= limit);
        return x % n;
    }

    bool bernoulli(double p) { return uniform() < p; }

    // Marsaglia polar method; the spare keeps consecutive draws cheap.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = uniform(-1.0, 1.0);
            v = uniform(-1.0, 1.0);
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double m = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * m;
        has_spare_ = true;
        return u * m;
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    template <typename V>
    void shuffle(V& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(bounded(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    static std::uint64_t splitmix64(std::uint64_t x) {
        x += 0x9E3779B97F4A7C15ull;
        x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
        x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
        return x ^ (x >> 31);
    }

    // Order-sensitive combine for deriving substream seeds.
    template <typename... Parts>
    static std::uint64_t mix(std::uint64_t first, Parts... rest) {
        std::uint64_t h = splitmix64(first);
        ((h = splitmix64(h ^ static_cast<std::uint64_t>(rest))), ...);
        return h;
    }

private:
    std::mt19937_64 gen_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

namespace init {

// sqrt(6 / fan_in) uniform bounds; the usual choice for layers feeding ReLU.
template <typename T>
void kaiming_uniform(Tensor<T>& t, std::size_t fan_in, Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
    for (std::size_t i = 0; i < t.size(); ++i)
        t[i] = static_cast<T>(rng.uniform(-limit, limit));
}

// Normal(0, std) with draws beyond two deviations rejected.
template <typename T>
void trunc_normal(Tensor<T>& t, double stddev, Rng& rng) {
    for (std::size_t i = 0; i < t.size(); ++i) {
        double z;
        do {
            z = rng.normal();
        } while (std::fabs(z) > 2.0);
        t[i] = static_cast<T>(z * stddev);
    }
}

} // namespace init
} // namespace cocoanet
