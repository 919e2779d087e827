#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "lvlab/actionangle.hpp"
#include "lvlab/csvio.hpp"
#include "lvlab/harness.hpp"

using namespace lvlab;

namespace {

ModelConfig linear_cfg(long n = 100) {
    return ModelConfig{Linear{1.0, 1.0}, Linear{-1.0, 1.0}, {n, 0.5}};
}

}  // namespace

TEST_CASE("replicate scheduling is thread-count independent") {
    const ModelConfig mc = linear_cfg();
    LlnParams p;
    p.ladder = {50, 100};
    p.replicates = 16;
    p.T = 1.0;
    const LadderReport one = lln_experiment(mc, p, 2024, 1);
    const LadderReport four = lln_experiment(mc, p, 2024, 4);
    REQUIRE(one.per_replicate.size() == four.per_replicate.size());
    for (std::size_t i = 0; i < one.per_replicate.size(); ++i)
        for (std::size_t r = 0; r < one.per_replicate[i].size(); ++r)
            CHECK(one.per_replicate[i][r] == four.per_replicate[i][r]);

    const Csv csv_one = ladder_replicates_csv(one, "sup_deviation");
    const Csv csv_four = ladder_replicates_csv(four, "sup_deviation");
    CHECK(fnv1a64(csv_one.str()) == fnv1a64(csv_four.str()));
}

TEST_CASE("lln sup-deviation scales like a root-N CLT band at the fixed point") {
    // constant utilities started at the center: pure fluctuation, slope ~ -1/2
    const ModelConfig mc{Linear{0.0, 1.0}, Linear{0.0, 1.0}, {100, 0.5}};
    LlnParams p;
    p.ladder = {200, 800, 3200};
    p.replicates = 60;
    p.T = 2.0;
    p.m0 = {0.5, 0.5};
    const LadderReport rep = lln_experiment(mc, p, 7, 2);
    std::vector<double> logn, logd;
    for (std::size_t i = 0; i < rep.ladder.size(); ++i) {
        logn.push_back(std::log(static_cast<double>(rep.ladder[i])));
        logd.push_back(std::log(rep.mean[i]));
    }
    const double slope = fitted_slope(logn, logd);
    CHECK(slope > -0.65);
    CHECK(slope < -0.35);
}

TEST_CASE("most N=1000 paths stay within sup-distance 0.1 of the ODE over [0,10]") {
    const Model model = model_with_n(linear_cfg(), 1000);
    const MacroState m0{0.7, 0.5};
    const OdePath path = integrate(m0, model, 10.0, 1e-3);
    const long reps = 200;
    long inside = 0;
    for (long r = 0; r < reps; ++r) {
        Rng rng = Rng::stream(606, {static_cast<std::uint64_t>(r)});
        MicroState s{700, 500, 0.0};
        double worst = 0.0;
        run_ssa(s, model, 10.0, rng, [&](const MicroState& cur) {
            const MacroState ode = path.at(cur.t);
            worst = std::max({worst, std::abs(cur.m1(model) - ode.m1),
                              std::abs(cur.m2(model) - ode.m2)});
        });
        if (worst <= 0.1) ++inside;
    }
    CHECK(inside >= 190);  // at least 95 percent
}

TEST_CASE("single large-population path shadows the ODE") {
    const ModelConfig mc = linear_cfg();
    LlnParams p;
    p.ladder = {100000};
    p.replicates = 1;
    p.T = 5.0;
    const LadderReport rep = lln_experiment(mc, p, 99, 1);
    CHECK(rep.per_replicate[0][0] < 0.05);
}

TEST_CASE("measured orbit period matches the elliptic closed form") {
    const Model model = model_with_n(linear_cfg(), 100);
    for (double h : {0.01, 0.05}) {
        const auto [x, y] = from_action_angle({h, 0.0}, model, HamiltonianKind::linear_equivalent);
        const double measured = measure_period({0.5 + x, 0.5 + y}, model, 1e-3);
        const double closed = period_linear_closed_form(h, model);
        CHECK(measured == Catch::Approx(closed).epsilon(1e-6));
    }
}

TEST_CASE("phase portrait of the LV model closes its orbits") {
    PhasePortraitParams p;
    p.grid = 3;
    const PhasePortraitReport rep = phase_portrait(linear_cfg(), p);
    CHECK(rep.orbits == 8);  // 3x3 grid minus the center
    CHECK(rep.max_return_distance < 1e-3);
}

TEST_CASE("averaging experiment produces matched, exit-clamped samples") {
    const ModelConfig mc = linear_cfg();
    AveragingParams p;
    p.N = 400;
    p.replicates = 60;
    p.checkpoints = {0.25};
    p.em_dt = 1e-4;
    const AveragingReport rep = averaging_experiment(mc, p, 31415, 2);
    REQUIRE(rep.micro_vs_sde.size() == 1);
    CHECK(rep.h_start == Catch::Approx(0.03).margin(1e-3));
    // small N: the distributions already sit on the same support
    CHECK(rep.micro_vs_sde[0].ks_statistic < 0.5);
    const double l = p.eps_left, r = 1.0 / 16.0 - p.eps_right;
    for (double v : rep.micro_samples[0]) {
        CHECK(v >= l - 1e-15);
        CHECK(v <= r + 1e-15);
    }
    REQUIRE(rep.micro_vs_control.size() == 1);
}

TEST_CASE("sde boundary experiment summarises exits") {
    SdeBoundaryParams p;
    p.replicates = 100;
    p.dt = 1e-3;
    const SdeBoundaryReport rep = sde_boundary_experiment(linear_cfg(), p, 5150, 2);
    CHECK(rep.still_running == 0);
    CHECK(rep.exited_left + rep.exited_right == 100);
    CHECK(rep.exited_left > rep.exited_right);
    CHECK(rep.mean_exit_time > 0.0);
}

TEST_CASE("csv formatting round-trips doubles and hashes stably") {
    Csv csv("a,b");
    csv.row(1.0 / 3.0, 42L);
    csv.row(std::nan(""), std::string("x"));
    const std::string expect_prefix = "a,b\n0.33333333333333331,42\n";
    CHECK(csv.str().substr(0, expect_prefix.size()) == expect_prefix);
    CHECK(fnv1a64(csv.str()) == fnv1a64(csv.str()));
    CHECK(hex64(fnv1a64("lvlab")).size() == 16);
}
