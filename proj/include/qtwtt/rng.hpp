#pragma once
// Deterministic random number generation.
//
// All stochastic code in the library draws through Rng so that a run is
// reproducible from a single master seed.  The raw generator is
// std::mt19937_64 (bit-exact output is pinned by the standard); the
// distribution transforms are implemented here by hand because libstdc++
// makes no portability promise for std::normal_distribution and friends.

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace qtwtt {

// SplitMix64 finalizer.  Used to derive statistically independent
// sub-seeds from (master seed, role index) pairs.
inline std::uint64_t mix_seed(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

// Sub-seed for a named role.  Every independent random consumer in a
// simulation owns a distinct role id, so adding a consumer never shifts
// the draws seen by the others.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t role) {
    return mix_seed(master + role * 0x9E3779B97F4A7C15ull);
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    std::uint64_t raw() { return eng_(); }

    // Uniform on [0, 1), 53-bit resolution.
    double uniform01() {
        return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
    }

    // Standard normal via Box-Muller; second deviate is cached.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = 1.0 - uniform01();  // (0, 1]
        double u2 = uniform01();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.28318530717958647692 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    double normal(double mean, double sigma) { return mean + sigma * normal(); }

    // Exponential with given rate (mean 1/rate).
    double exponential(double rate) {
        return -std::log(1.0 - uniform01()) / rate;
    }

private:
    std::mt19937_64 eng_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

// Homogeneous Poisson arrival times on [t0_s, t1_s), strictly increasing.
inline std::vector<double> poisson_times(Rng& rng, double rate_hz, double t0_s,
                                         double t1_s) {
    std::vector<double> out;
    if (rate_hz <= 0.0 || t1_s <= t0_s) return out;
    out.reserve(static_cast<std::size_t>(rate_hz * (t1_s - t0_s) * 1.1) + 16);
    double t = t0_s;
    for (;;) {
        t += rng.exponential(rate_hz);
        if (t >= t1_s) break;
        out.push_back(t);
    }
    return out;
}

}  // namespace qtwtt
