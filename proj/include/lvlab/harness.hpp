#pragma once

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "lvlab/actionangle.hpp"
#include "lvlab/config.hpp"
#include "lvlab/csvio.hpp"
#include "lvlab/macroode.hpp"
#include "lvlab/microsim.hpp"
#include "lvlab/model.hpp"
#include "lvlab/rng.hpp"
#include "lvlab/sdelimit.hpp"
#include "lvlab/stats.hpp"

namespace lvlab {

// ── replicate scheduling ─────────────────────────────────────────────────────

inline int default_threads() {
    if (const char* env = std::getenv("LVLAB_THREADS")) {
        const int n = std::atoi(env);
        if (n >= 1) return n;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw ? static_cast<int>(hw) : 1;
}

/// Work queue of independent replicates. fn(i) must write only to its own
/// slot; results are merged by index, so the outcome is thread-count
/// independent.
template <class F>
void parallel_replicates(long n, int threads, F&& fn) {
    threads = std::max(1, threads);
    if (threads == 1 || n <= 1) {
        for (long i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<long> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    auto worker = [&] {
        for (;;) {
            const long i = next.fetch_add(1);
            if (i >= n) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

// stream tags so that no two experiments share randomness under one root seed
namespace stream_tag {
inline constexpr std::uint64_t lln = 0x11;
inline constexpr std::uint64_t chaos_init = 0x21;
inline constexpr std::uint64_t chaos_marks = 0x22;
inline constexpr std::uint64_t avg_micro = 0x33;
inline constexpr std::uint64_t avg_sde = 0x44;
inline constexpr std::uint64_t avg_control = 0x55;
inline constexpr std::uint64_t boundary = 0x66;
inline constexpr std::uint64_t microsim = 0x77;
}  // namespace stream_tag

// ── law of large numbers ladder ──────────────────────────────────────────────

struct LadderReport {
    std::vector<long> ladder;
    std::vector<double> mean;
    std::vector<double> sem;
    std::vector<std::vector<double>> per_replicate;
    bool decreasing = true;              ///< means strictly decrease along the ladder
    bool decreasing_significant = true;  ///< each decrease exceeds 1 combined SE
};

inline void finalize_ladder(LadderReport& rep) {
    for (const auto& vals : rep.per_replicate) {
        rep.mean.push_back(mean_of(vals));
        rep.sem.push_back(vals.size() > 1 ? standard_error(vals) : 0.0);
    }
    for (std::size_t i = 0; i + 1 < rep.mean.size(); ++i) {
        const double drop = rep.mean[i] - rep.mean[i + 1];
        if (drop <= 0.0) rep.decreasing = false;
        const double se = std::sqrt(rep.sem[i] * rep.sem[i] + rep.sem[i + 1] * rep.sem[i + 1]);
        if (drop < se) rep.decreasing_significant = false;
    }
}

inline void require_ladder(const std::vector<long>& ladder, long replicates) {
    if (replicates < 1) fail(errc::range_error, "experiments need at least one replicate");
    if (ladder.empty()) fail(errc::range_error, "the N-ladder must be non-empty");
    for (std::size_t i = 0; i + 1 < ladder.size(); ++i)
        if (ladder[i] >= ladder[i + 1])
            fail(errc::range_error, "the N-ladder must be strictly increasing");
}

struct LlnParams {
    std::vector<long> ladder{200, 800, 3200};
    long replicates = 200;
    double T = 5.0;
    MacroState m0{0.7, 0.5};
    double ode_dt = 1e-3;
};

/// sup_{t<=T} ||m^N(t) - m(t)||_1 averaged over replicates, for each N.
inline LadderReport lln_experiment(const ModelConfig& mc, const LlnParams& p, std::uint64_t seed,
                                   int threads) {
    require_ladder(p.ladder, p.replicates);
    LadderReport rep;
    rep.ladder = p.ladder;
    for (std::size_t rung = 0; rung < p.ladder.size(); ++rung) {
        const Model model = model_with_n(mc, p.ladder[rung]);
        const OdePath path = integrate(p.m0, model, p.T, p.ode_dt);
        std::vector<double> sup(static_cast<std::size_t>(p.replicates));
        parallel_replicates(p.replicates, threads, [&](long r) {
            Rng rng = Rng::stream(seed, {stream_tag::lln, rung, static_cast<std::uint64_t>(r)});
            MicroState s{std::lround(p.m0.m1 * static_cast<double>(model.Nk(1))),
                         std::lround(p.m0.m2 * static_cast<double>(model.Nk(2))), 0.0};
            double prev_m1 = s.m1(model), prev_m2 = s.m2(model);
            double worst = std::abs(prev_m1 - p.m0.m1) + std::abs(prev_m2 - p.m0.m2);
            run_ssa(s, model, p.T, rng, [&](const MicroState& cur) {
                const MacroState ode = path.at(cur.t);
                const double m1 = cur.m1(model), m2 = cur.m2(model);
                const double before = std::abs(prev_m1 - ode.m1) + std::abs(prev_m2 - ode.m2);
                const double after = std::abs(m1 - ode.m1) + std::abs(m2 - ode.m2);
                worst = std::max({worst, before, after});
                prev_m1 = m1;
                prev_m2 = m2;
            });
            const MacroState fin = path.at(p.T);
            worst = std::max(worst, std::abs(prev_m1 - fin.m1) + std::abs(prev_m2 - fin.m2));
            sup[static_cast<std::size_t>(r)] = worst;
        });
        rep.per_replicate.push_back(std::move(sup));
    }
    finalize_ladder(rep);
    return rep;
}

// ── propagation-of-chaos ladder ──────────────────────────────────────────────

struct ChaosParams {
    std::vector<long> ladder{100, 400, 1600};
    long replicates = 100;
    double T = 5.0;
    MacroState m0{0.7, 0.5};
    double ode_dt = 1e-3;
};

/// mean per-particle sup-discrepancy of the coupled pair, for each N
inline LadderReport chaos_experiment(const ModelConfig& mc, const ChaosParams& p,
                                     std::uint64_t seed, int threads) {
    require_ladder(p.ladder, p.replicates);
    LadderReport rep;
    rep.ladder = p.ladder;
    for (std::size_t rung = 0; rung < p.ladder.size(); ++rung) {
        const Model model = model_with_n(mc, p.ladder[rung]);
        const OdePath path = integrate(p.m0, model, p.T, p.ode_dt);
        std::vector<double> disc(static_cast<std::size_t>(p.replicates));
        const std::uint64_t mark_root = seed ^ (stream_tag::chaos_marks << 32) ^ rung;
        parallel_replicates(p.replicates, threads, [&](long r) {
            Rng init = Rng::stream(seed, {stream_tag::chaos_init, rung,
                                          static_cast<std::uint64_t>(r)});
            ParticleState bits;
            bits.bits.resize(static_cast<std::size_t>(model.N()));
            for (long i = 0; i < model.N(); ++i) {
                const double m = (i < model.Nk(1)) ? p.m0.m1 : p.m0.m2;
                bits.bits[static_cast<std::size_t>(i)] = init.uniform() < m ? 1 : 0;
            }
            const CouplingResult res = coupled_simulate(bits, model, path, p.T, mark_root,
                                                        static_cast<std::uint64_t>(r));
            disc[static_cast<std::size_t>(r)] = res.mean_sup_discrepancy;
        });
        rep.per_replicate.push_back(std::move(disc));
    }
    finalize_ladder(rep);
    return rep;
}

// ── averaging-principle comparison ───────────────────────────────────────────

struct AveragingParams {
    long N = 2000;
    long replicates = 500;        ///< per side
    double h0 = 0.03;
    double theta0 = 0.0;
    double eps_left = 1e-3;       ///< stopping interval (eps_left, 1/16 - eps_right)
    double eps_right = 1e-3;
    std::vector<double> checkpoints{0.5, 1.0};
    double em_dt = 1e-4;
    bool with_negative_control = true;
};

struct AveragingReport {
    std::vector<double> checkpoints;
    std::vector<TwoSampleReport> micro_vs_sde;
    std::vector<TwoSampleReport> micro_vs_control;  ///< drift sign swapped in the SDE
    double h_start = 0.0;
    std::vector<std::vector<double>> micro_samples, sde_samples, control_samples;
};

namespace detail {

/// run the collapsed chain to micro horizon N * t_max, sampling the conserved
/// level at the checkpoint times N * c_j and freezing it (clamped to the
/// boundary) at the first exit from (l, r)
inline void micro_h_samples(const Model& model, MicroState s, double l, double r,
                            const std::vector<double>& checkpoints, Rng& rng,
                            std::vector<double>& out) {
    const double n = static_cast<double>(model.N());
    auto level = [&](const MicroState& st) {
        const double x = st.m1(model) - 0.5, y = st.m2(model) - 0.5;
        return (0.25 - x * x) * (0.25 - y * y);
    };
    double h = level(s);
    std::size_t next_cp = 0;
    out.assign(checkpoints.size(), 0.0);

    while (next_cp < checkpoints.size()) {
        const RateQuad rates_now = rates(s, model);
        const double total = rates_now.total();
        double t_next;
        int which = -1;
        if (total > 0.0) {
            t_next = s.t + rng.exponential(total);
            const double w[4] = {rates_now.up1, rates_now.down1, rates_now.up2, rates_now.down2};
            which = rng.pick(w, 4, total);
        } else {
            t_next = checkpoints.back() * n + 1.0;  // absorbed; h is frozen
        }
        while (next_cp < checkpoints.size() && checkpoints[next_cp] * n <= t_next) {
            out[next_cp] = h;
            ++next_cp;
        }
        if (next_cp >= checkpoints.size()) break;
        if (which >= 0) {
            switch (which) {
                case 0: ++s.k1; break;
                case 1: --s.k1; break;
                case 2: ++s.k2; break;
                default: --s.k2; break;
            }
            s.t = t_next;
            h = level(s);
            if (h <= l || h >= r) {  // stopped; clamp to the crossed boundary
                h = (h <= l) ? l : r;
                for (; next_cp < checkpoints.size(); ++next_cp) out[next_cp] = h;
            }
        } else {
            h = (h <= l) ? l : r;
            for (; next_cp < checkpoints.size(); ++next_cp) out[next_cp] = h;
        }
    }
}

/// Euler–Maruyama marginals at the checkpoints with the same stopping and
/// clamping convention
template <class Drift, class DiffSq>
void sde_h_samples(double h0, Drift&& b, DiffSq&& s2, double l, double r,
                   const std::vector<double>& checkpoints, double dt, Rng& rng,
                   std::vector<double>& out) {
    out.assign(checkpoints.size(), 0.0);
    double h = h0, t = 0.0;
    std::size_t next_cp = 0;
    const double t_end = checkpoints.back();
    bool stopped = false;
    while (next_cp < checkpoints.size()) {
        while (next_cp < checkpoints.size() && checkpoints[next_cp] <= t + 1e-12) {
            out[next_cp] = h;
            ++next_cp;
        }
        if (next_cp >= checkpoints.size() || stopped) {
            for (; next_cp < checkpoints.size(); ++next_cp) out[next_cp] = h;
            break;
        }
        if (t >= t_end) break;
        double var = s2(h);
        if (var < 0.0) var = 0.0;
        h += b(h) * dt + std::sqrt(var * dt) * rng.normal();
        t += dt;
        if (h <= l || h >= r) {
            h = (h <= l) ? l : r;
            stopped = true;
        }
    }
}

}  // namespace detail

/// Sample A: the conserved level of the sped-up microscopic chain, H^N(N t).
/// Sample B: Euler–Maruyama marginals of the averaged one-dimensional SDE.
/// Matched initial level, matched stopping interval; KS and W1 per checkpoint.
inline AveragingReport averaging_experiment(const ModelConfig& mc, const AveragingParams& p,
                                            std::uint64_t seed, int threads) {
    const Model model = model_with_n(mc, p.N);
    if (!model.is_linear_pair())
        fail(errc::non_monotone, "the averaging experiment uses the linear LV model");
    const double l = p.eps_left, r = 1.0 / 16.0 - p.eps_right;

    const auto [x0, y0] =
        from_action_angle({p.h0, p.theta0}, model, HamiltonianKind::linear_equivalent);
    const MicroState s0{std::lround((0.5 + x0) * static_cast<double>(model.Nk(1))),
                        std::lround((0.5 + y0) * static_cast<double>(model.Nk(2))), 0.0};
    const double m1s = s0.m1(model), m2s = s0.m2(model);
    const double xs = m1s - 0.5, ys = m2s - 0.5;
    const double h_start = (0.25 - xs * xs) * (0.25 - ys * ys);

    const SdeCoefficients coeffs =
        SdeCoefficients::make(model, CoeffMode::linear_closed_form);

    const std::size_t n_cp = p.checkpoints.size();
    const std::size_t reps = static_cast<std::size_t>(p.replicates);
    std::vector<std::vector<double>> micro(reps), sde(reps), control(reps);

    parallel_replicates(p.replicates, threads, [&](long rr) {
        const auto r_ = static_cast<std::uint64_t>(rr);
        Rng rng_micro = Rng::stream(seed, {stream_tag::avg_micro, r_});
        detail::micro_h_samples(model, s0, l, r, p.checkpoints, rng_micro, micro[rr]);

        Rng rng_sde = Rng::stream(seed, {stream_tag::avg_sde, r_});
        detail::sde_h_samples(
            h_start, [&](double h) { return coeffs.drift(h); },
            [&](double h) { return coeffs.diffusion_sq(h); }, l, r, p.checkpoints, p.em_dt,
            rng_sde, sde[rr]);

        if (p.with_negative_control) {
            Rng rng_ctl = Rng::stream(seed, {stream_tag::avg_control, r_});
            detail::sde_h_samples(
                h_start, [&](double h) { return -coeffs.drift(h); },
                [&](double h) { return coeffs.diffusion_sq(h); }, l, r, p.checkpoints, p.em_dt,
                rng_ctl, control[rr]);
        }
    });

    AveragingReport rep;
    rep.checkpoints = p.checkpoints;
    rep.h_start = h_start;
    for (std::size_t j = 0; j < n_cp; ++j) {
        std::vector<double> a(reps), b(reps), c(reps);
        for (std::size_t i = 0; i < reps; ++i) {
            a[i] = micro[i][j];
            b[i] = sde[i][j];
            if (p.with_negative_control) c[i] = control[i][j];
        }
        rep.micro_samples.push_back(a);
        rep.sde_samples.push_back(b);
        rep.micro_vs_sde.push_back(two_sample_stats(a, b));
        if (p.with_negative_control) {
            rep.control_samples.push_back(c);
            rep.micro_vs_control.push_back(two_sample_stats(a, c));
        }
    }
    return rep;
}

// ── CSV views of the reports (shared by the CLI and the test harnesses so the
//    byte-determinism contract has a single code path) ─────────────────────────

inline Csv ladder_replicates_csv(const LadderReport& rep, const std::string& value_name) {
    Csv csv("N,replicate," + value_name);
    for (std::size_t i = 0; i < rep.ladder.size(); ++i)
        for (std::size_t r = 0; r < rep.per_replicate[i].size(); ++r)
            csv.row(rep.ladder[i], static_cast<long>(r), rep.per_replicate[i][r]);
    return csv;
}

inline Csv ladder_summary_csv(const LadderReport& rep) {
    Csv csv("N,mean,sem");
    for (std::size_t i = 0; i < rep.ladder.size(); ++i)
        csv.row(rep.ladder[i], rep.mean[i], rep.sem[i]);
    return csv;
}

// ── SDE boundary behaviour ───────────────────────────────────────────────────

struct SdeBoundaryParams {
    long replicates = 2000;
    double h0 = 0.03;
    double T = 200.0;
    double dt = 1e-4;
    double l = 1e-4;
    double r = 1.0 / 16.0;
};

struct SdeBoundaryReport {
    long exited_left = 0, exited_right = 0, still_running = 0;
    double mean_exit_time = 0.0;
    std::vector<double> exit_times;
    std::vector<int> exit_sides;
};

inline SdeBoundaryReport sde_boundary_experiment(const ModelConfig& mc, const SdeBoundaryParams& p,
                                                 std::uint64_t seed, int threads) {
    const Model model = Model::validate(mc.phi1, mc.phi2, mc.pop);
    const SdeCoefficients coeffs =
        SdeCoefficients::make(model, CoeffMode::linear_closed_form);
    const std::size_t reps = static_cast<std::size_t>(p.replicates);

    SdeBoundaryReport rep;
    rep.exit_times.assign(reps, 0.0);
    rep.exit_sides.assign(reps, 0);
    parallel_replicates(p.replicates, threads, [&](long rr) {
        Rng rng = Rng::stream(seed, {stream_tag::boundary, static_cast<std::uint64_t>(rr)});
        const SdePath path = euler_maruyama(p.h0, coeffs, {p.l, p.r}, p.T, p.dt, rng,
                                            std::numeric_limits<std::size_t>::max());
        rep.exit_times[rr] = path.exit_time;
        rep.exit_sides[rr] = path.exit_side;
    });
    double acc = 0.0;
    long exited = 0;
    for (std::size_t i = 0; i < reps; ++i) {
        if (rep.exit_sides[i] == 0) ++rep.still_running;
        else {
            ++exited;
            acc += rep.exit_times[i];
            (rep.exit_sides[i] < 0 ? rep.exited_left : rep.exited_right) += 1;
        }
    }
    rep.mean_exit_time = exited ? acc / static_cast<double>(exited) : 0.0;
    return rep;
}

// ── orbit-period measurement and phase portraits ─────────────────────────────

/// Time for the macroscopic orbit through `start` to wind once around the
/// center; RK4 stepping with a secant refinement of the 2*pi crossing.
inline double measure_period(const MacroState& start, const Model& model, double dt,
                             double t_cap = 1e5) {
    auto deriv = [&](const MacroState& p) { return rhs(p, model); };
    auto rk4 = [&](MacroState s, double step) {
        const auto [a1, a2] = deriv(s);
        const auto [b1, b2] = deriv({s.m1 + 0.5 * step * a1, s.m2 + 0.5 * step * a2});
        const auto [c1, c2] = deriv({s.m1 + 0.5 * step * b1, s.m2 + 0.5 * step * b2});
        const auto [d1, d2] = deriv({s.m1 + step * c1, s.m2 + step * c2});
        return MacroState{s.m1 + step / 6.0 * (a1 + 2.0 * (b1 + c1) + d1),
                          s.m2 + step / 6.0 * (a2 + 2.0 * (b2 + c2) + d2)};
    };
    auto angle = [](const MacroState& s) { return std::atan2(s.y(), s.x()); };

    MacroState s = start;
    double unwrapped = 0.0, prev = angle(s), t = 0.0;
    while (t < t_cap) {
        const MacroState n = rk4(s, dt);
        double a = angle(n);
        double delta = a - prev;
        if (delta > 3.141592653589793) delta -= TWO_PI;
        if (delta < -3.141592653589793) delta += TWO_PI;
        if (std::abs(unwrapped + delta) >= TWO_PI) {
            // refine the crossing inside [t, t+dt] by secant on the winding
            const double target = (unwrapped + delta > 0.0) ? TWO_PI : -TWO_PI;
            double lo = 0.0, hi = dt, wlo = unwrapped, whi = unwrapped + delta;
            for (int it = 0; it < 60; ++it) {
                const double tau =
                    lo + (target - wlo) * (hi - lo) / (whi - wlo);
                const MacroState mid = rk4(s, tau);
                double am = angle(mid) - prev;
                if (am > 3.141592653589793) am -= TWO_PI;
                if (am < -3.141592653589793) am += TWO_PI;
                const double w = unwrapped + am;
                if ((w - target) * (whi - target) <= 0.0) { lo = tau; wlo = w; }
                else { hi = tau; whi = w; }
                if (std::abs(w - target) < 1e-12 || hi - lo < 1e-14) return t + tau;
            }
            return t + 0.5 * (lo + hi);
        }
        unwrapped += delta;
        prev = a;
        s = n;
        t += dt;
    }
    fail(errc::range_error, "orbit did not complete a revolution within the time cap");
}

struct PhasePortraitParams {
    int grid = 5;          ///< grid x grid interior initial conditions
    double T = 0.0;        ///< 0: one measured revolution per orbit (monotone LV)
    double dt = 1e-3;
    double record_stride = 0.05;
};

struct PhasePortraitReport {
    int orbits = 0;
    double max_return_distance = 0.0;  ///< meaningful for closed LV orbits
    Csv data{"orbit,t,m1,m2"};
};

inline PhasePortraitReport phase_portrait(const ModelConfig& mc, const PhasePortraitParams& p) {
    const Model model = Model::validate(mc.phi1, mc.phi2, mc.pop);
    PhasePortraitReport rep;
    const bool closed_orbits = model.is_lv() && p.T == 0.0;
    int orbit_id = 0;
    for (int i = 1; i <= p.grid; ++i) {
        for (int j = 1; j <= p.grid; ++j) {
            const MacroState ic{static_cast<double>(i) / (p.grid + 1.0),
                                static_cast<double>(j) / (p.grid + 1.0)};
            if (std::abs(ic.x()) < 1e-12 && std::abs(ic.y()) < 1e-12) continue;
            double T = p.T;
            if (closed_orbits) T = measure_period(ic, model, p.dt);
            const OdePath path = integrate(ic, model, T, p.dt);
            const std::size_t stride =
                std::max<std::size_t>(1, static_cast<std::size_t>(p.record_stride / p.dt));
            for (std::size_t k = 0; k < path.nodes(); k += stride)
                rep.data.row(orbit_id, path.node_time(k), path.node(k).m1, path.node(k).m2);
            const MacroState back = path.at(T);
            rep.data.row(orbit_id, T, back.m1, back.m2);
            if (closed_orbits) {
                const double dist = std::abs(back.m1 - ic.m1) + std::abs(back.m2 - ic.m2);
                rep.max_return_distance = std::max(rep.max_return_distance, dist);
            }
            ++orbit_id;
        }
    }
    rep.orbits = orbit_id;
    return rep;
}

}  // namespace lvlab
