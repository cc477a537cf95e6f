#pragma once

// Seeded random number generation with samplers written out explicitly:
// std::mt19937_64 is pinned by the standard, but the std distributions are
// implementation-defined, so uniform/normal/Bernoulli draws go through our
// own transforms to keep seeded runs byte-identical.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace ipsi {

// splitmix64 finalizer; used to derive independent streams from a master seed.
inline std::uint64_t mix_seed(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a,
                                 std::uint64_t b = 0, std::uint64_t c = 0) {
    std::uint64_t s = mix_seed(master);
    s = mix_seed(s ^ (a * 0xA24BAED4963EE407ull));
    s = mix_seed(s ^ (b * 0x9FB21C651E98DF25ull));
    s = mix_seed(s ^ (c * 0xD6E8FEB86659FD93ull));
    return s;
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    // uniform on [0, 1)
    double uniform() {
        return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
    }

    // standard normal, Box-Muller with cached partner
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = 1.0 - uniform(); // (0, 1], keeps log finite
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    int bernoulli(double p) { return uniform() < p ? 1 : 0; }

    // inversion sampler; fine for the modest rates used by the demo data
    long poisson(double lambda) {
        const double u = uniform();
        double p = std::exp(-lambda);
        double cum = p;
        long k = 0;
        while (u > cum && k < 10000) {
            ++k;
            p *= lambda / static_cast<double>(k);
            cum += p;
        }
        return k;
    }

    std::uint64_t next_u64() { return eng_(); }

private:
    std::mt19937_64 eng_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

} // namespace ipsi
