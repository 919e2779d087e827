#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <string>
#include <variant>

#include "lvlab/errors.hpp"
#include "lvlab/rng.hpp"

namespace lvlab {

// ── utility functions ────────────────────────────────────────────────────────

/// phi(z) = a z + b
struct Linear {
    double a = 0.0;
    double b = 1.0;
};

/// phi(z) = c exp(s z), c > 0
struct Exponential {
    double c = 1.0;
    double s = 0.0;
};

using UtilityFn = std::variant<Linear, Exponential>;

inline double utility_eval(const UtilityFn& f, double z) {
    if (const auto* l = std::get_if<Linear>(&f)) return l->a * z + l->b;
    const auto& e = std::get<Exponential>(f);
    return e.c * std::exp(e.s * z);
}

inline double utility_deriv(const UtilityFn& f, double z) {
    if (const auto* l = std::get_if<Linear>(&f)) return l->a;
    const auto& e = std::get<Exponential>(f);
    return e.c * e.s * std::exp(e.s * z);
}

/// exact minimum over [lo,hi] (both families are monotone)
inline double utility_min_on(const UtilityFn& f, double lo, double hi) {
    return std::min(utility_eval(f, lo), utility_eval(f, hi));
}

inline double utility_max_on(const UtilityFn& f, double lo, double hi) {
    return std::max(utility_eval(f, lo), utility_eval(f, hi));
}

/// sign of phi' (constant within each family): -1, 0, +1
inline int utility_orientation(const UtilityFn& f) {
    if (const auto* l = std::get_if<Linear>(&f)) return (l->a > 0.0) - (l->a < 0.0);
    const auto& e = std::get<Exponential>(f);
    return (e.s > 0.0) - (e.s < 0.0);
}

// ── population ───────────────────────────────────────────────────────────────

enum class SplitMode { deterministic, bernoulli_sampled };

struct PopulationSpec {
    long N = 2;                                   ///< total population, >= 2
    double r1 = 0.5;                              ///< asymptotic fraction of family 1, in (0,1)
    SplitMode split = SplitMode::deterministic;   ///< deterministic: N1 = round(r1 N)
    std::uint64_t split_seed = 0;                 ///< used by bernoulli_sampled only
};

enum class Monotonicity {
    lotka_volterra,    ///< phi1 strictly increasing, phi2 strictly decreasing
    reversed_lv,       ///< phi1 decreasing, phi2 increasing (swap families to get LV)
    both_increasing,
    both_decreasing,
    non_monotone       ///< at least one derivative vanishes (zealot family)
};

struct PsiValues {
    double psi;        ///< psi_k(z)  = phi_k(r_j z) - phi_k(r_j (1-z))
    double psi_plus;   ///< psi_k+(z) = phi_k(r_j z) + phi_k(r_j (1-z))
    double psi_prime;  ///< d/dz psi_k(z)
};

// ── validated model ──────────────────────────────────────────────────────────

/// Immutable bundle of the two utilities and the resolved population split.
///
/// Construction enforces:
///  - phi_k >= 0 on [0,1] and phi_k > 0 on [0, N_{k'}/N], the interval on
///    which the dynamics actually evaluates it (rates and the thinning bound
///    both need strict positivity there);
///  - r1 in (0,1), N >= 2, and both resolved family sizes >= 1.
///
/// Safe to share freely across threads after construction.
class Model {
public:
    static Model validate(const UtilityFn& phi1, const UtilityFn& phi2, const PopulationSpec& pop) {
        if (!(pop.r1 > 0.0 && pop.r1 < 1.0))
            fail(errc::bad_fraction, "pop.r1 must lie in (0,1), got " + std::to_string(pop.r1));
        if (pop.N < 2) fail(errc::degenerate_population, "population must have N >= 2");

        long n1;
        if (pop.split == SplitMode::deterministic) {
            n1 = std::lround(pop.r1 * static_cast<double>(pop.N));
        } else {
            Rng rng = Rng::stream(pop.split_seed, {0x51B0ull});
            n1 = 0;
            for (long i = 0; i < pop.N; ++i) n1 += (rng.uniform() < pop.r1) ? 1 : 0;
        }
        const long n2 = pop.N - n1;
        if (n1 < 1 || n2 < 1)
            fail(errc::degenerate_population,
                 "resolved family sizes are (" + std::to_string(n1) + ", " + std::to_string(n2) +
                     "); both must be >= 1");

        Model m;
        m.phi_[0] = phi1;
        m.phi_[1] = phi2;
        m.pop_ = pop;
        m.nk_[0] = n1;
        m.nk_[1] = n2;

        // positivity: weak on [0,1], strict on the realized evaluation interval
        for (int k = 1; k <= 2; ++k) {
            const UtilityFn& f = m.phi_[k - 1];
            if (utility_min_on(f, 0.0, 1.0) < 0.0)
                fail(errc::non_positive_utility,
                     "phi" + std::to_string(k) + " is negative somewhere on [0,1]");
            const double hi = m.q(3 - k);  // argument range of phi_k is [0, N_{k'}/N]
            if (utility_min_on(f, 0.0, hi) <= 0.0)
                fail(errc::non_positive_utility,
                     "phi" + std::to_string(k) + " is not strictly positive on [0, N" +
                         std::to_string(3 - k) + "/N]");
        }

        const int o1 = utility_orientation(phi1), o2 = utility_orientation(phi2);
        if (o1 > 0 && o2 < 0) m.mono_ = Monotonicity::lotka_volterra;
        else if (o1 < 0 && o2 > 0) m.mono_ = Monotonicity::reversed_lv;
        else if (o1 > 0 && o2 > 0) m.mono_ = Monotonicity::both_increasing;
        else if (o1 < 0 && o2 < 0) m.mono_ = Monotonicity::both_decreasing;
        else m.mono_ = Monotonicity::non_monotone;
        return m;
    }

    double phi(int k, double z) const { return utility_eval(phi_[k - 1], z); }
    double phi_prime(int k, double z) const { return utility_deriv(phi_[k - 1], z); }
    const UtilityFn& utility(int k) const { return phi_[k - 1]; }

    /// asymptotic fraction r_k
    double r(int k) const { return k == 1 ? pop_.r1 : 1.0 - pop_.r1; }
    /// realized fraction N_k/N
    double q(int k) const { return static_cast<double>(nk_[k - 1]) / static_cast<double>(pop_.N); }
    long N() const { return pop_.N; }
    long Nk(int k) const { return nk_[k - 1]; }
    SplitMode split_mode() const { return pop_.split; }

    Monotonicity monotonicity() const { return mono_; }
    bool is_monotone() const {
        return mono_ == Monotonicity::lotka_volterra || mono_ == Monotonicity::reversed_lv ||
               mono_ == Monotonicity::both_increasing || mono_ == Monotonicity::both_decreasing;
    }
    bool is_lv() const { return mono_ == Monotonicity::lotka_volterra; }

    /// true iff the pair is phi1 = a z + b1, phi2 = -a z + b2 with a > 0
    /// (the form with closed-form Hamiltonian, angle flow and SDE coefficients)
    bool is_linear_pair() const {
        const auto* l1 = std::get_if<Linear>(&phi_[0]);
        const auto* l2 = std::get_if<Linear>(&phi_[1]);
        return l1 && l2 && l1->a > 0.0 && l2->a == -l1->a;
    }
    double linear_slope() const {
        if (!is_linear_pair()) fail(errc::non_monotone, "model is not a linear LV pair");
        return std::get<Linear>(phi_[0]).a;
    }

    /// psi_k and companions, evaluated exactly from the closed-form family.
    /// z must lie in [0,1]; the r's used are the asymptotic fractions.
    PsiValues psi(int k, double z) const {
        if (!(z >= 0.0 && z <= 1.0))
            fail(errc::out_of_domain, "psi argument must lie in [0,1], got " + std::to_string(z));
        const double rj = r(3 - k);
        const double up = phi(k, rj * z), down = phi(k, rj * (1.0 - z));
        return {up - down, up + down,
                rj * (phi_prime(k, rj * z) + phi_prime(k, rj * (1.0 - z)))};
    }

    /// uniform dominating constant for Poisson thinning:
    /// C = max_k sup of the per-particle jump rate <= max_k sup phi_k on its range
    double thinning_bound() const {
        return std::max(utility_max_on(phi_[0], 0.0, q(2)), utility_max_on(phi_[1], 0.0, q(1)));
    }

    /// stable identity for caches keyed by model
    std::uint64_t hash() const {
        std::uint64_t h = 0xcbf29ce484222325ull;
        auto mix = [&h](double v) {
            std::uint64_t bits;
            std::memcpy(&bits, &v, sizeof bits);
            h ^= bits;
            h *= 0x100000001b3ull;
        };
        for (const auto& f : phi_) {
            if (const auto* l = std::get_if<Linear>(&f)) {
                mix(1.0);
                mix(l->a);
                mix(l->b);
            } else {
                const auto& e = std::get<Exponential>(f);
                mix(2.0);
                mix(e.c);
                mix(e.s);
            }
        }
        mix(pop_.r1);
        mix(static_cast<double>(pop_.N));
        mix(static_cast<double>(nk_[0]));
        return h;
    }

private:
    Model() = default;

    UtilityFn phi_[2] = {Linear{}, Linear{}};
    PopulationSpec pop_;
    long nk_[2] = {1, 1};
    Monotonicity mono_ = Monotonicity::non_monotone;
};

}  // namespace lvlab
