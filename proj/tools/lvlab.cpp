// lvlab — command-line front end for the two-family opinion-dynamics toolkit.
//
// Subcommands: macro-ode, fixed-points, orbit, micro-sim, chaos-test,
// lln-test, averaging-test, sde-sim, phase-portrait.  Every experiment writes
// its CSV outputs plus a MANIFEST into --out; identical --config and --seed
// give byte-identical CSVs regardless of --threads.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "lvlab/actionangle.hpp"
#include "lvlab/config.hpp"
#include "lvlab/csvio.hpp"
#include "lvlab/harness.hpp"
#include "lvlab/macroode.hpp"
#include "lvlab/microsim.hpp"
#include "lvlab/model.hpp"
#include "lvlab/sdelimit.hpp"

namespace {

using namespace lvlab;

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(errc::bad_config, "cannot read config file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct Common {
    std::string config_path;
    std::string out_dir = "out";
    std::uint64_t seed = 1;
    long replicates = 0;  // 0: experiment default
    int threads = 0;      // 0: default_threads()
};

struct RunContext {
    KeyValueConfig cfg;
    ModelConfig mc;
    std::filesystem::path out;
    int threads;
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    Manifest manifest;

    RunContext(const Common& c)
        : cfg(KeyValueConfig::parse(read_file(c.config_path))),
          mc(parse_model_config(cfg)),
          out(c.out_dir),
          threads(c.threads > 0 ? c.threads : default_threads()) {
        std::filesystem::create_directories(out);
        manifest.config_text = cfg.text();
        manifest.seed = c.seed;
        manifest.threads = threads;
        manifest.complete = false;
        write_manifest();  // marks the run incomplete until finish()
    }

    void add_output(const std::string& name, const Csv& csv) {
        csv.write(out / name);
        manifest.outputs.emplace_back(name, hex64(fnv1a64(csv.str())));
    }

    void write_manifest() {
        manifest.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        manifest.write(out / "MANIFEST");
    }

    void finish() {
        manifest.complete = true;
        write_manifest();
    }
};

void add_common(CLI::App* sub, Common& c) {
    sub->add_option("--config", c.config_path, "model config file (key=value)")->required();
    sub->add_option("--seed", c.seed, "root seed");
    sub->add_option("--out", c.out_dir, "output directory");
    sub->add_option("--replicates", c.replicates, "replicate count override");
    sub->add_option("--threads", c.threads, "worker threads (default: LVLAB_THREADS or hardware)");
}

const char* type_name(FixedPointType t) {
    switch (t) {
        case FixedPointType::stable_node: return "stable";
        case FixedPointType::unstable_node: return "unstable";
        case FixedPointType::saddle: return "saddle";
        default: return "center";
    }
}

int run_macro_ode(const Common& c, double T, double dt, double m1, double m2) {
    RunContext ctx(c);
    const Model model = Model::validate(ctx.mc.phi1, ctx.mc.phi2, ctx.mc.pop);
    const OdePath path = integrate({m1, m2}, model, T, dt);
    Csv csv("t,m1,m2,h");
    for (std::size_t i = 0; i < path.nodes(); ++i) {
        const MacroState s = path.node(i);
        double h = std::numeric_limits<double>::quiet_NaN();
        if (model.is_monotone() && s.interior())
            h = hamiltonian(s, model,
                            model.is_linear_pair() ? HamiltonianKind::linear_equivalent
                                                   : HamiltonianKind::general);
        csv.row(path.node_time(i), s.m1, s.m2, h);
    }
    ctx.add_output("macro_ode.csv", csv);
    ctx.finish();
    return 0;
}

int run_fixed_points(const Common& c) {
    RunContext ctx(c);
    const Model model = Model::validate(ctx.mc.phi1, ctx.mc.phi2, ctx.mc.pop);
    Csv csv("m1,m2,re_lambda1,im_lambda1,re_lambda2,im_lambda2,type");
    for (const FixedPoint& fp : fixed_points(model)) {
        csv.row(fp.point.m1, fp.point.m2, fp.lambda1.real(), fp.lambda1.imag(),
                fp.lambda2.real(), fp.lambda2.imag(), type_name(fp.type));
        std::cout << "(" << fp.point.m1 << ", " << fp.point.m2 << ")  " << type_name(fp.type)
                  << "  lambda = " << fp.lambda1.real() << "+" << fp.lambda1.imag() << "i, "
                  << fp.lambda2.real() << "+" << fp.lambda2.imag() << "i\n";
    }
    ctx.add_output("fixed_points.csv", csv);
    ctx.finish();
    return 0;
}

int run_orbit(const Common& c, double h, int samples) {
    RunContext ctx(c);
    const Model model = Model::validate(ctx.mc.phi1, ctx.mc.phi2, ctx.mc.pop);
    const HamiltonianKind kind =
        model.is_linear_pair() ? HamiltonianKind::linear_equivalent : HamiltonianKind::general;
    Csv csv("theta,x,y,F,mu");
    for (int i = 0; i < samples; ++i) {
        const double theta = TWO_PI * i / samples;
        const auto [x, y] = from_action_angle({h, theta}, model, kind);
        const AngularField f = angular_field({h, theta}, model, kind);
        csv.row(theta, x, y, f.F, f.mu);
    }
    ctx.add_output("orbit.csv", csv);
    ctx.finish();
    return 0;
}

int run_micro_sim(const Common& c, double T, double m1, double m2, long replicates) {
    RunContext ctx(c);
    const Model model = Model::validate(ctx.mc.phi1, ctx.mc.phi2, ctx.mc.pop);
    const MicroState s0{std::lround(m1 * static_cast<double>(model.Nk(1))),
                        std::lround(m2 * static_cast<double>(model.Nk(2))), 0.0};
    std::vector<Trajectory> trajs(static_cast<std::size_t>(replicates));
    parallel_replicates(replicates, ctx.threads, [&](long r) {
        Rng rng = Rng::stream(ctx.manifest.seed, {stream_tag::microsim,
                                                  static_cast<std::uint64_t>(r)});
        trajs[static_cast<std::size_t>(r)] = simulate(s0, model, T, rng, r == 0);
    });
    Csv traj_csv("t,k1,k2,m1,m2");
    for (const MicroState& s : trajs[0].states)
        traj_csv.row(s.t, s.k1, s.k2, s.m1(model), s.m2(model));
    ctx.add_output("trajectory.csv", traj_csv);
    Csv abs_csv("replicate,seed,t_abs,corner");
    for (long r = 0; r < replicates; ++r) {
        const Trajectory& tr = trajs[static_cast<std::size_t>(r)];
        abs_csv.row(r, ctx.manifest.seed, tr.absorbed ? tr.t_abs : -1.0, tr.corner);
    }
    ctx.add_output("absorption.csv", abs_csv);
    ctx.finish();
    return 0;
}

int run_lln(const Common& c, LlnParams p) {
    RunContext ctx(c);
    if (c.replicates > 0) p.replicates = c.replicates;
    const LadderReport rep = lln_experiment(ctx.mc, p, ctx.manifest.seed, ctx.threads);
    ctx.add_output("lln_replicates.csv", ladder_replicates_csv(rep, "sup_deviation"));
    ctx.add_output("lln_summary.csv", ladder_summary_csv(rep));
    ctx.finish();
    std::cout << "lln ladder decreasing=" << rep.decreasing
              << " significant=" << rep.decreasing_significant << "\n";
    return rep.decreasing_significant ? 0 : 2;
}

int run_chaos(const Common& c, ChaosParams p) {
    RunContext ctx(c);
    if (c.replicates > 0) p.replicates = c.replicates;
    const LadderReport rep = chaos_experiment(ctx.mc, p, ctx.manifest.seed, ctx.threads);
    ctx.add_output("chaos_replicates.csv", ladder_replicates_csv(rep, "mean_sup_discrepancy"));
    ctx.add_output("chaos_summary.csv", ladder_summary_csv(rep));
    ctx.finish();
    std::cout << "chaos ladder decreasing=" << rep.decreasing << "\n";
    return rep.decreasing ? 0 : 2;
}

int run_averaging(const Common& c, AveragingParams p, double ks_threshold) {
    RunContext ctx(c);
    if (c.replicates > 0) p.replicates = c.replicates;
    const AveragingReport rep = averaging_experiment(ctx.mc, p, ctx.manifest.seed, ctx.threads);
    Csv samples("checkpoint,side,replicate,h");
    for (std::size_t j = 0; j < rep.checkpoints.size(); ++j) {
        for (std::size_t i = 0; i < rep.micro_samples[j].size(); ++i)
            samples.row(rep.checkpoints[j], "micro", static_cast<long>(i),
                        rep.micro_samples[j][i]);
        for (std::size_t i = 0; i < rep.sde_samples[j].size(); ++i)
            samples.row(rep.checkpoints[j], "sde", static_cast<long>(i), rep.sde_samples[j][i]);
    }
    ctx.add_output("averaging_samples.csv", samples);
    Csv report("checkpoint,ks,w1,ks_control");
    bool pass = true;
    for (std::size_t j = 0; j < rep.checkpoints.size(); ++j) {
        const double ks = rep.micro_vs_sde[j].ks_statistic;
        const double ksc =
            rep.micro_vs_control.empty() ? -1.0 : rep.micro_vs_control[j].ks_statistic;
        report.row(rep.checkpoints[j], ks, rep.micro_vs_sde[j].wasserstein1, ksc);
        std::cout << "t=" << rep.checkpoints[j] << "  KS=" << ks << "  W1="
                  << rep.micro_vs_sde[j].wasserstein1 << "  KS(control)=" << ksc << "\n";
        if (ks >= ks_threshold) pass = false;
    }
    ctx.add_output("averaging_report.csv", report);
    ctx.finish();
    return pass ? 0 : 2;
}

int run_sde_sim(const Common& c, SdeBoundaryParams p, double record_dt) {
    RunContext ctx(c);
    if (c.replicates > 0) p.replicates = c.replicates;
    const Model model = Model::validate(ctx.mc.phi1, ctx.mc.phi2, ctx.mc.pop);
    const SdeCoefficients coeffs = SdeCoefficients::make(model, CoeffMode::linear_closed_form);
    Rng rng = Rng::stream(ctx.manifest.seed, {stream_tag::boundary, 0xFFFFull});
    const SdePath sample = euler_maruyama(
        p.h0, coeffs, {p.l, p.r}, p.T, p.dt, rng,
        std::max<std::size_t>(1, static_cast<std::size_t>(record_dt / p.dt)));
    Csv path_csv("t,h");
    for (std::size_t i = 0; i < sample.t.size(); ++i) path_csv.row(sample.t[i], sample.h[i]);
    ctx.add_output("sde_path.csv", path_csv);

    const SdeBoundaryReport rep = sde_boundary_experiment(ctx.mc, p, ctx.manifest.seed, ctx.threads);
    Csv exits("replicate,exit_time,exit_side");
    for (std::size_t i = 0; i < rep.exit_times.size(); ++i)
        exits.row(static_cast<long>(i), rep.exit_times[i], rep.exit_sides[i]);
    ctx.add_output("exit_summary.csv", exits);
    ctx.finish();
    std::cout << "exits: left=" << rep.exited_left << " right=" << rep.exited_right
              << " running=" << rep.still_running << " mean_exit_time=" << rep.mean_exit_time
              << "\n";
    return 0;
}

int run_phase_portrait(const Common& c, PhasePortraitParams p) {
    RunContext ctx(c);
    PhasePortraitReport rep = phase_portrait(ctx.mc, p);
    ctx.add_output("phase_portrait.csv", rep.data);
    ctx.finish();
    std::cout << "orbits=" << rep.orbits << " max_return_distance=" << rep.max_return_distance
              << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"two-family opinion dynamics: microscopic simulation, mean-field ODE, "
                 "action-angle reduction, averaged SDE"};
    app.require_subcommand(1);

    Common c;
    double T = 20.0, dt = 1e-3, m1 = 0.7, m2 = 0.5, h = 0.03, record_dt = 0.01;
    int samples = 360;
    double ks_threshold = 0.12;
    LlnParams lln;
    ChaosParams chaos;
    AveragingParams avg;
    SdeBoundaryParams sde;
    PhasePortraitParams portrait;

    auto* c_ode = app.add_subcommand("macro-ode", "integrate the mean-field ODE");
    add_common(c_ode, c);
    c_ode->add_option("--T", T, "horizon");
    c_ode->add_option("--dt", dt, "step");
    c_ode->add_option("--m1", m1, "initial m1");
    c_ode->add_option("--m2", m2, "initial m2");

    auto* c_fp = app.add_subcommand("fixed-points", "classify the five fixed points");
    add_common(c_fp, c);

    auto* c_orbit = app.add_subcommand("orbit", "emit theta,x,y,F,mu along one orbit");
    add_common(c_orbit, c);
    c_orbit->add_option("--level", h, "conserved level h");
    c_orbit->add_option("--samples", samples, "angle samples");

    auto* c_micro = app.add_subcommand("micro-sim", "exact SSA of the count chain");
    add_common(c_micro, c);
    c_micro->add_option("--T", T, "horizon");
    c_micro->add_option("--m1", m1, "initial fraction, family 1");
    c_micro->add_option("--m2", m2, "initial fraction, family 2");

    auto* c_lln = app.add_subcommand("lln-test", "law-of-large-numbers ladder");
    add_common(c_lln, c);
    c_lln->add_option("--T", lln.T, "horizon");

    auto* c_chaos = app.add_subcommand("chaos-test", "coupled-pair chaos ladder");
    add_common(c_chaos, c);
    c_chaos->add_option("--T", chaos.T, "horizon");

    auto* c_avg = app.add_subcommand("averaging-test", "micro H^N(Nt) vs averaged SDE");
    add_common(c_avg, c);
    c_avg->add_option("--N", avg.N, "population size");
    c_avg->add_option("--h0", avg.h0, "initial level");
    c_avg->add_option("--ks-threshold", ks_threshold, "pass threshold on KS");

    auto* c_sde = app.add_subcommand("sde-sim", "Euler-Maruyama paths of the averaged SDE");
    add_common(c_sde, c);
    c_sde->add_option("--h0", sde.h0, "initial level");
    c_sde->add_option("--T", sde.T, "horizon");
    c_sde->add_option("--dt", sde.dt, "step");
    c_sde->add_option("--record-dt", record_dt, "path recording stride");

    auto* c_pp = app.add_subcommand("phase-portrait", "grid of macroscopic trajectories");
    add_common(c_pp, c);
    c_pp->add_option("--grid", portrait.grid, "grid size");
    c_pp->add_option("--T", portrait.T, "horizon (0: one revolution for LV models)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (c_ode->parsed()) return run_macro_ode(c, T, dt, m1, m2);
        if (c_fp->parsed()) return run_fixed_points(c);
        if (c_orbit->parsed()) return run_orbit(c, h, samples);
        if (c_micro->parsed())
            return run_micro_sim(c, T, m1, m2, c.replicates > 0 ? c.replicates : 100);
        if (c_lln->parsed()) return run_lln(c, lln);
        if (c_chaos->parsed()) return run_chaos(c, chaos);
        if (c_avg->parsed()) return run_averaging(c, avg, ks_threshold);
        if (c_sde->parsed()) return run_sde_sim(c, sde, record_dt);
        if (c_pp->parsed()) return run_phase_portrait(c, portrait);
    } catch (const lvlab::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        if (e.code() == lvlab::errc::bad_config) return 1;
        if (e.code() == lvlab::errc::internal) return 3;
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 3;
    }
    return 1;
}
