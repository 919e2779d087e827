#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>

namespace lvlab {

/// splitmix64; used for seeding and for deriving child streams.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

/// xoshiro256++ with counter-based stream derivation.
///
/// Every ensemble draws its randomness from streams derived as
/// Rng::stream(root_seed, {id0, id1, ...}); distinct id paths give
/// independent streams, so replicates are reproducible regardless of the
/// order in which worker threads pick them up.
class Rng {
public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t sm = seed;
        for (auto& w : s_) w = splitmix64(sm);
    }

    static Rng stream(std::uint64_t root, std::initializer_list<std::uint64_t> path) {
        std::uint64_t sm = root;
        std::uint64_t acc = splitmix64(sm);
        for (std::uint64_t id : path) {
            sm = acc ^ (id + 0x9E3779B97F4A7C15ull);
            acc = splitmix64(sm);
            acc ^= splitmix64(sm);
        }
        return Rng(acc);
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    /// uniform in [0,1) with 53 random bits
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double a, double b) { return a + (b - a) * uniform(); }

    /// Exp(rate); rate > 0
    double exponential(double rate) { return -std::log1p(-uniform()) / rate; }

    /// standard normal (Box-Muller, spare cached)
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform(), u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    /// index i with probability w[i]/total, w[i] >= 0, total = sum(w)
    int pick(const double* w, int n, double total) {
        double target = uniform() * total;
        for (int i = 0; i < n - 1; ++i) {
            target -= w[i];
            if (target < 0.0) return i;
        }
        return n - 1;
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    std::uint64_t s_[4];
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace lvlab
