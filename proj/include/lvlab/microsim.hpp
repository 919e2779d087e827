#pragma once

#include <cstdint>
#include <queue>
#include <utility>
#include <vector>

#include "lvlab/errors.hpp"
#include "lvlab/macroode.hpp"
#include "lvlab/model.hpp"
#include "lvlab/rng.hpp"

namespace lvlab {

// ── collapsed count chain ────────────────────────────────────────────────────
//
// Exchangeability within each family makes the pair of opinion-1 counts
// (k1, k2) a Markov chain carrying the full law of the mean-field variables;
// the event loop is O(1) per jump instead of O(N).

struct MicroState {
    long k1 = 0;  ///< opinion-1 count in family 1, 0..N1
    long k2 = 0;
    double t = 0.0;

    double m1(const Model& model) const {
        return static_cast<double>(k1) / static_cast<double>(model.Nk(1));
    }
    double m2(const Model& model) const {
        return static_cast<double>(k2) / static_cast<double>(model.Nk(2));
    }
};

struct RateQuad {
    double up1 = 0.0, down1 = 0.0, up2 = 0.0, down2 = 0.0;
    double total() const { return up1 + down1 + up2 + down2; }
};

/// Aggregate transition rates of the count chain:
///   up_k   = (N_k - k_k) * (N_k/N) m_k       phi_k((N_k'/N) m_k')
///   down_k =        k_k  * (N_k/N) (1 - m_k) phi_k((N_k'/N) (1 - m_k'))
inline RateQuad rates(const MicroState& s, const Model& model) {
    const double q1 = model.q(1), q2 = model.q(2);
    const double m1 = s.m1(model), m2 = s.m2(model);
    RateQuad r;
    r.up1 = static_cast<double>(model.Nk(1) - s.k1) * q1 * m1 * model.phi(1, q2 * m2);
    r.down1 = static_cast<double>(s.k1) * q1 * (1.0 - m1) * model.phi(1, q2 * (1.0 - m2));
    r.up2 = static_cast<double>(model.Nk(2) - s.k2) * q2 * m2 * model.phi(2, q1 * m1);
    r.down2 = static_cast<double>(s.k2) * q2 * (1.0 - m2) * model.phi(2, q1 * (1.0 - m1));
    return r;
}

inline bool is_absorbing(const MicroState& s, const Model& model) {
    return (s.k1 == 0 || s.k1 == model.Nk(1)) && (s.k2 == 0 || s.k2 == model.Nk(2));
}

/// corner index: bit 1 set if family 1 reached all-ones, bit 0 for family 2
inline int corner_of(const MicroState& s, const Model& model) {
    return ((s.k1 == model.Nk(1)) ? 2 : 0) + ((s.k2 == model.Nk(2)) ? 1 : 0);
}

struct SsaStep {
    MicroState next;
    double dt;
};

/// One exact SSA event: dt ~ Exp(total rate), transition chosen with
/// probability proportional to its rate.
inline SsaStep ssa_step(const MicroState& s, const Model& model, Rng& rng) {
    const RateQuad r = rates(s, model);
    const double total = r.total();
    if (!(total > 0.0)) fail(errc::absorbed, "state is absorbing: total rate is zero");
    const double dt = rng.exponential(total);
    const double w[4] = {r.up1, r.down1, r.up2, r.down2};
    const int which = rng.pick(w, 4, total);
    MicroState n = s;
    n.t += dt;
    switch (which) {
        case 0: ++n.k1; break;
        case 1: --n.k1; break;
        case 2: ++n.k2; break;
        default: --n.k2; break;
    }
    return {n, dt};
}

/// Event loop up to min(horizon, absorption); on_event(state) runs after each
/// applied jump.  Returns true if the chain absorbed before the horizon.
/// The state is left at the horizon time (jumps scheduled past it are not
/// applied, matching the piecewise-constant path).
template <class F>
bool run_ssa(MicroState& s, const Model& model, double horizon, Rng& rng, F&& on_event) {
    while (true) {
        const RateQuad r = rates(s, model);
        const double total = r.total();
        if (!(total > 0.0)) {
            s.t = horizon;
            return true;
        }
        const double dt = rng.exponential(total);
        if (s.t + dt > horizon) {
            s.t = horizon;
            return false;
        }
        const double w[4] = {r.up1, r.down1, r.up2, r.down2};
        switch (rng.pick(w, 4, total)) {
            case 0: ++s.k1; break;
            case 1: --s.k1; break;
            case 2: ++s.k2; break;
            default: --s.k2; break;
        }
        s.t += dt;
        on_event(s);
    }
}

struct Trajectory {
    std::vector<MicroState> states;  ///< piecewise-constant path, first entry = initial state
    bool absorbed = false;
    int corner = -1;       ///< which of the four consensus corners, if absorbed
    double t_abs = -1.0;   ///< absorption time, if absorbed
};

inline Trajectory simulate(const MicroState& s0, const Model& model, double horizon, Rng& rng,
                           bool record_path = true) {
    if (!(horizon > 0.0)) fail(errc::range_error, "horizon must be positive");
    Trajectory traj;
    traj.states.push_back(s0);
    MicroState s = s0;
    double t_last_event = s0.t;
    const bool absorbed = run_ssa(s, model, horizon, rng, [&](const MicroState& cur) {
        if (record_path) traj.states.push_back(cur);
        t_last_event = cur.t;
    });
    traj.absorbed = absorbed;
    if (absorbed) {
        traj.corner = corner_of(s, model);
        traj.t_abs = t_last_event;
    } else if (!record_path || traj.states.back().t < s.t) {
        traj.states.push_back(s);
    }
    return traj;
}

// ── exact generator of the count chain ───────────────────────────────────────

/// Q-matrix of the collapsed chain, stored row-wise; rows sum to zero.
class CountGenerator {
public:
    CountGenerator(long n1, long n2) : n1_(n1), n2_(n2), rows_(states()) {}

    long states() const { return (n1_ + 1) * (n2_ + 1); }
    long index(long k1, long k2) const { return k1 * (n2_ + 1) + k2; }
    std::pair<long, long> counts(long idx) const { return {idx / (n2_ + 1), idx % (n2_ + 1)}; }

    void add(long row, long col, double rate) { rows_[row].push_back({col, rate}); }

    const std::vector<std::pair<long, double>>& row(long r) const { return rows_[r]; }

    double row_sum(long r) const {
        double s = 0.0;
        for (const auto& [c, v] : rows_[r]) s += v;
        return s;
    }

    /// (Q f)(row) for f given on the state space
    double apply(const std::vector<double>& f, long r) const {
        double s = 0.0;
        for (const auto& [c, v] : rows_[r]) s += v * f[c];
        return s;
    }

private:
    long n1_, n2_;
    std::vector<std::vector<std::pair<long, double>>> rows_;
};

inline CountGenerator generator_matrix(const Model& model) {
    const long n1 = model.Nk(1), n2 = model.Nk(2);
    if ((n1 + 1) * (n2 + 1) > 10000)
        fail(errc::too_large, "count-chain state space exceeds 10^4 states");
    CountGenerator q(n1, n2);
    for (long k1 = 0; k1 <= n1; ++k1) {
        for (long k2 = 0; k2 <= n2; ++k2) {
            const long row = q.index(k1, k2);
            const RateQuad r = rates({k1, k2}, model);
            double diag = 0.0;
            if (r.up1 > 0.0) { q.add(row, q.index(k1 + 1, k2), r.up1); diag += r.up1; }
            if (r.down1 > 0.0) { q.add(row, q.index(k1 - 1, k2), r.down1); diag += r.down1; }
            if (r.up2 > 0.0) { q.add(row, q.index(k1, k2 + 1), r.up2); diag += r.up2; }
            if (r.down2 > 0.0) { q.add(row, q.index(k1, k2 - 1), r.down2); diag += r.down2; }
            if (diag > 0.0) q.add(row, row, -diag);
        }
    }
    return q;
}

// ── per-particle coupling ────────────────────────────────────────────────────
//
// Both systems are driven by one realization of per-particle Poisson marks:
// particle (i,k) carries a Poisson clock of rate C = thinning bound; at each
// mark a single u ~ U(0, C) decides both flips by thinning.  The micro
// particle consults the finite-N rate with the current empirical fractions,
// the bar particle the limit rate with the fractions of the dense ODE path.

struct ParticleState {
    std::vector<std::uint8_t> bits;  ///< first N1 entries are family 1
    double t = 0.0;
};

struct CouplingOptions {
    /// drive the micro side with the limit rate too (same thinning threshold,
    /// same marks): the two systems must then agree path by path
    bool drive_micro_with_limit_rates = false;
};

struct CouplingResult {
    std::vector<std::uint8_t> ever_differed;  ///< per particle: sup_t |sigma - sigma_bar|
    double mean_sup_discrepancy = 0.0;
    bool domination_ok = true;  ///< every evaluated rate stayed below the thinning bound
    long marks = 0;
    bool micro_absorbed = false;
    double micro_t_abs = -1.0;
    MicroState micro_final;
    std::vector<std::uint8_t> micro_bits;
    std::vector<std::uint8_t> bar_bits;
};

inline CouplingResult coupled_simulate(const ParticleState& s0, const Model& model,
                                       const OdePath& macro, double horizon,
                                       std::uint64_t root_seed, std::uint64_t replicate,
                                       CouplingOptions opts = {}) {
    if (!model.is_monotone())
        fail(errc::non_monotone, "the coupling is run for monotone utilities");
    if (horizon > macro.horizon() + 1e-12)
        fail(errc::horizon_exceeds_ode, "macro solution does not cover the coupling horizon");
    const long N = model.N();
    if (static_cast<long>(s0.bits.size()) != N)
        fail(errc::range_error, "initial bits must have length N");

    const double C = model.thinning_bound();
    const long n1 = model.Nk(1);
    const double q1 = model.q(1), q2 = model.q(2);
    const double r1 = model.r(1), r2 = model.r(2);

    std::vector<std::uint8_t> micro = s0.bits, bar = s0.bits;
    CouplingResult out;
    out.ever_differed.assign(N, 0);

    long k1 = 0, k2 = 0;
    for (long i = 0; i < N; ++i) (i < n1 ? k1 : k2) += micro[i];

    std::vector<Rng> streams;
    streams.reserve(N);
    std::priority_queue<std::pair<double, long>, std::vector<std::pair<double, long>>,
                        std::greater<>>
        clock;
    for (long i = 0; i < N; ++i) {
        streams.push_back(Rng::stream(root_seed, {replicate, 0x9A71ull + static_cast<std::uint64_t>(i)}));
        clock.push({s0.t + streams.back().exponential(C), i});
    }

    auto micro_absorbing = [&] {
        return (k1 == 0 || k1 == n1) && (k2 == 0 || k2 == model.Nk(2));
    };

    while (!clock.empty() && clock.top().first <= horizon) {
        auto [t, i] = clock.top();
        clock.pop();
        ++out.marks;

        const int fam = (i < n1) ? 1 : 2;
        const double u = streams[i].uniform(0.0, C);
        const MacroState m = macro.at(t);

        const double m1N = static_cast<double>(k1) / static_cast<double>(n1);
        const double m2N = static_cast<double>(k2) / static_cast<double>(model.Nk(2));

        // finite-N thinning threshold for the micro particle
        double lamN;
        if (!opts.drive_micro_with_limit_rates) {
            if (fam == 1)
                lamN = micro[i] == 0 ? q1 * m1N * model.phi(1, q2 * m2N)
                                     : q1 * (1.0 - m1N) * model.phi(1, q2 * (1.0 - m2N));
            else
                lamN = micro[i] == 0 ? q2 * m2N * model.phi(2, q1 * m1N)
                                     : q2 * (1.0 - m2N) * model.phi(2, q1 * (1.0 - m1N));
        } else {
            if (fam == 1)
                lamN = micro[i] == 0 ? r1 * m.m1 * model.phi(1, r2 * m.m2)
                                     : r1 * (1.0 - m.m1) * model.phi(1, r2 * (1.0 - m.m2));
            else
                lamN = micro[i] == 0 ? r2 * m.m2 * model.phi(2, r1 * m.m1)
                                     : r2 * (1.0 - m.m2) * model.phi(2, r1 * (1.0 - m.m1));
        }

        // limit threshold for the bar particle, fractions from the ODE path
        double lam;
        if (fam == 1)
            lam = bar[i] == 0 ? r1 * m.m1 * model.phi(1, r2 * m.m2)
                              : r1 * (1.0 - m.m1) * model.phi(1, r2 * (1.0 - m.m2));
        else
            lam = bar[i] == 0 ? r2 * m.m2 * model.phi(2, r1 * m.m1)
                              : r2 * (1.0 - m.m2) * model.phi(2, r1 * (1.0 - m.m1));

        if (lamN > C + 1e-12 || lam > C + 1e-12) out.domination_ok = false;

        const bool was_absorbing = micro_absorbing();
        if (u <= lamN) {
            micro[i] ^= 1;
            const long delta = micro[i] ? 1 : -1;
            (fam == 1 ? k1 : k2) += delta;
        }
        if (u <= lam) bar[i] ^= 1;
        if (micro[i] != bar[i]) out.ever_differed[i] = 1;

        if (!was_absorbing && micro_absorbing()) {
            out.micro_absorbed = true;
            out.micro_t_abs = t;
        }

        clock.push({t + streams[i].exponential(C), i});
    }

    double acc = 0.0;
    for (auto e : out.ever_differed) acc += e;
    out.mean_sup_discrepancy = acc / static_cast<double>(N);
    out.micro_final = {k1, k2, horizon};
    out.micro_bits = std::move(micro);
    out.bar_bits = std::move(bar);
    return out;
}

}  // namespace lvlab
