#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "lvlab/config.hpp"
#include "lvlab/model.hpp"
#include "lvlab/rng.hpp"

using namespace lvlab;

namespace {

Model linear_lv(long n = 100, double r1 = 0.5) {
    return Model::validate(Linear{1.0, 1.0}, Linear{-1.0, 1.0}, {n, r1});
}

Model exp_lv(long n = 100, double r1 = 0.5) {
    return Model::validate(Exponential{1.0, 1.0}, Exponential{2.0, -0.5}, {n, r1});
}

}  // namespace

TEST_CASE("validate accepts the canonical models and resolves the split") {
    const Model m = Model::validate(Linear{1.0, 1.0}, Linear{1.0, 1.0}, {100, 0.5});
    CHECK(m.Nk(1) == 50);
    CHECK(m.Nk(2) == 50);
    CHECK(m.monotonicity() == Monotonicity::both_increasing);

    const Model lv = linear_lv();
    CHECK(lv.is_lv());
    CHECK(lv.is_linear_pair());
    CHECK(lv.linear_slope() == 1.0);

    CHECK(exp_lv().is_lv());
    CHECK_FALSE(exp_lv().is_linear_pair());
}

TEST_CASE("validate rejects bad inputs with the right error codes") {
    auto code = [](auto&& fn) {
        try {
            fn();
        } catch (const Error& e) {
            return e.code();
        }
        return errc::internal;
    };
    CHECK(code([] { Model::validate(Linear{-2.0, 1.0}, Linear{1.0, 1.0}, {100, 0.5}); }) ==
          errc::non_positive_utility);
    CHECK(code([] {
              Model::validate(Exponential{1.0, -1.0}, Exponential{2.0, 0.5}, {3, 0.9});
          }) == errc::degenerate_population);
    CHECK(code([] { Model::validate(Linear{1.0, 1.0}, Linear{1.0, 1.0}, {100, 1.5}); }) ==
          errc::bad_fraction);
    CHECK(code([] { Model::validate(Linear{1.0, 1.0}, Linear{1.0, 1.0}, {100, 0.5}).psi(1, 1.5); }) ==
          errc::out_of_domain);
}

TEST_CASE("bernoulli split is reproducible from its seed") {
    PopulationSpec pop{1000, 0.3, SplitMode::bernoulli_sampled, 42};
    const Model a = Model::validate(Linear{1.0, 1.0}, Linear{-1.0, 1.0}, pop);
    const Model b = Model::validate(Linear{1.0, 1.0}, Linear{-1.0, 1.0}, pop);
    CHECK(a.Nk(1) == b.Nk(1));
    CHECK(a.Nk(1) + a.Nk(2) == 1000);
    // a realization near the mean, not exactly at it
    CHECK(std::abs(a.q(1) - 0.3) < 0.1);
}

TEST_CASE("psi values: linear closed form and odd symmetry") {
    const Model m = linear_lv();
    // psi_1(z) = r2 a (2z - 1)
    for (double z : {0.0, 0.3, 0.5, 0.8, 1.0}) {
        CHECK(m.psi(1, z).psi == Catch::Approx(0.5 * (2.0 * z - 1.0)).margin(1e-15));
        CHECK(m.psi(2, z).psi == Catch::Approx(-0.5 * (2.0 * z - 1.0)).margin(1e-15));
    }
    CHECK(m.psi(1, 0.5).psi == 0.0);

    // exponential example: c=1, s=1, r_j = 0.5, z=1 -> e^{0.5} - 1
    const Model e = exp_lv();
    CHECK(e.psi(1, 1.0).psi == Catch::Approx(0.64872127070012815).epsilon(1e-12));
}

TEST_CASE("psi symmetry, derivative and LV sign over random models") {
    Rng rng(123);
    for (int trial = 0; trial < 8; ++trial) {
        const double r1 = rng.uniform(0.2, 0.8);
        const Model m = (trial % 2 == 0) ? linear_lv(100, r1) : exp_lv(100, r1);
        for (int k = 1; k <= 2; ++k) {
            for (int i = 0; i < 1000; ++i) {
                const double z = rng.uniform();
                const PsiValues at = m.psi(k, z);
                const PsiValues mirror = m.psi(k, 1.0 - z);
                CHECK(std::abs(at.psi + mirror.psi) < 1e-14);
                CHECK(std::abs(at.psi_plus - mirror.psi_plus) < 1e-14);
            }
            for (double z : {0.1, 0.35, 0.5, 0.62, 0.9}) {
                const double fd =
                    (m.psi(k, z + 1e-6).psi - m.psi(k, z - 1e-6).psi) / 2e-6;
                const double exact = m.psi(k, z).psi_prime;
                CHECK(std::abs(fd - exact) <= 1e-6 * std::max(1.0, std::abs(exact)));
            }
        }
        for (double z : {0.51, 0.7, 0.99}) {
            CHECK(m.psi(1, z).psi > 0.0);
            CHECK(m.psi(2, z).psi < 0.0);
        }
    }
}

TEST_CASE("thinning bound dominates every per-particle rate") {
    for (const Model& m : {linear_lv(50, 0.37), exp_lv(64, 0.61)}) {
        const double C = m.thinning_bound();
        Rng rng(7);
        for (int i = 0; i < 2000; ++i) {
            const double m1 = rng.uniform(), m2 = rng.uniform();
            const double lam_up = m.q(1) * m1 * m.phi(1, m.q(2) * m2);
            const double lam_dn = m.q(1) * (1.0 - m1) * m.phi(1, m.q(2) * (1.0 - m2));
            CHECK(lam_up <= C + 1e-12);
            CHECK(lam_dn <= C + 1e-12);
        }
    }
}

TEST_CASE("flat key=value config round-trips into a model") {
    const std::string text =
        "# linear Lotka-Volterra\n"
        "phi1.kind = linear\nphi1.a = 1.0\nphi1.b = 1.0\n"
        "phi2.kind = linear\nphi2.a = -1.0\nphi2.b = 1.0\n"
        "pop.N = 1000\npop.r1 = 0.5\npop.split = deterministic\n";
    const ModelConfig mc = parse_model_config(KeyValueConfig::parse(text));
    const Model m = Model::validate(mc.phi1, mc.phi2, mc.pop);
    CHECK(m.N() == 1000);
    CHECK(m.is_linear_pair());

    CHECK_THROWS_AS(KeyValueConfig::parse("phi1.kind linear\n"), Error);
    CHECK_THROWS_AS(parse_model_config(KeyValueConfig::parse("phi1.kind = banana\n")), Error);
}
