#include <cmath>
#include <memory>

#include "doctest.h"
#include "gen.hpp"
#include "runmax/errors.hpp"
#include "runmax/harness.hpp"
#include "runmax/lipschitz.hpp"
#include "runmax/occupation.hpp"
#include "runmax/simulate.hpp"

using namespace runmax;
using testgen::Gen;
using testgen::sir_params;

namespace {

SirModel n1_model(double lambda) {
    SirModel m;
    m.params = sir_params({3.0}, {1.0}, {{1.0}}, lambda);
    m.claims = ClaimLaw::dirac(1.0);
    return m;
}

SirModel n2_model(double lambda = 0.5) {
    SirModel m;
    m.params = sir_params({3.0, 2.0}, {1.0, 1.0}, {{1.0, 1.0}, {2.0, 1.5}}, lambda);
    m.claims = ClaimLaw::quantize([](double u) { return 2.0 * u; }, 8);
    return m;
}

// Fine fixed-step RK4 of the untruncated n = 1 SIR drift (capital frozen since c0 = 0).
std::pair<double, double> rk4_sir(double s, double i, double beta, double gamma, double u, double T) {
    const int steps = 20000;
    double dt = T / steps;
    auto f = [&](double a, double b) { return std::pair{-beta * u * a * b, (beta * u * a - gamma) * b}; };
    for (int k = 0; k < steps; ++k) {
        auto [k1s, k1i] = f(s, i);
        auto [k2s, k2i] = f(s + dt / 2 * k1s, i + dt / 2 * k1i);
        auto [k3s, k3i] = f(s + dt / 2 * k2s, i + dt / 2 * k2i);
        auto [k4s, k4i] = f(s + dt * k3s, i + dt * k3i);
        s += dt / 6 * (k1s + 2 * k2s + 2 * k3s + k4s);
        i += dt / 6 * (k1i + 2 * k2i + 2 * k3i + k4i);
    }
    return {s, i};
}

}  // namespace

TEST_CASE("no jumps without a Poisson rate; path matches a fine RK4 oracle") {
    SirModel m = n1_model(0.0);
    Dynamics dyn = Dynamics::sir(m);
    SimOptions o;
    o.horizon = 3.0;
    o.seed = 5;
    std::vector<double> x0{0.9, 0.05, 0.0};
    Trajectory tr = simulate_path(dyn, x0, PolicySpec::constant({0.8, {1.0}}), o);
    for (char f : tr.jump_flags) CHECK(f == 0);
    CHECK(tr.events.empty());
    auto [s, i] = rk4_sir(0.9, 0.05, 3.0, 1.0, 0.8, 3.0);
    CHECK(tr.final_state()[0] == doctest::Approx(s).epsilon(1e-7));
    CHECK(tr.final_state()[1] == doctest::Approx(i).epsilon(1e-7));
    CHECK(tr.final_state()[2] == 0.0);
    CHECK(tr.times.back() == doctest::Approx(3.0));
}

TEST_CASE("single-edge jumps are zero vectors on 100 seeded paths") {
    SirModel m = n1_model(0.9);
    Dynamics dyn = Dynamics::sir(m);
    std::size_t jumps = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        SimOptions o;
        o.horizon = 5.0;
        o.seed = seed;
        Trajectory tr = simulate_path(dyn, std::vector<double>{0.7, 0.2, 0.0}, PolicySpec::constant({1.0, {1.0}}), o);
        std::size_t j = 0;
        for (std::size_t k = 0; k < tr.size(); ++k) {
            if (!tr.jump_flags[k]) continue;
            for (std::size_t d = 0; d < 3; ++d) CHECK(tr.state(k)[d] == tr.left_limits[j * 3 + d]);
            ++j;
        }
        jumps += j;
    }
    CHECK(jumps > 100);
}

TEST_CASE("frozen dynamics keep the state constant") {
    Dynamics dyn = Dynamics::frozen(5, ClaimLaw::dirac(1.0), 0.7, 1.0);
    std::vector<double> x0{0.1, 0.2, 0.3, 0.4, -2.0};
    SimOptions o;
    o.horizon = 4.0;
    o.seed = 9;
    Trajectory tr = simulate_path(dyn, x0, PolicySpec::constant({1.0, {1.0, 1.0}}), o);
    for (std::size_t k = 0; k < tr.size(); ++k)
        for (std::size_t d = 0; d < 5; ++d) CHECK(tr.state(k)[d] == x0[d]);
    CHECK(tr.a.back() == doctest::Approx(std::exp(-4.0)));
}

TEST_CASE("same seed, same path; events depend only on the clock parameters") {
    SirModel m = n2_model();
    Dynamics dyn = Dynamics::sir(m);
    SimOptions o;
    o.horizon = 3.0;
    o.seed = 42;
    std::vector<double> x0{0.6, 0.7, 0.2, 0.1, 0.0};
    auto pol = PolicySpec::constant({1.0, {2.0, 1.5}});
    Trajectory a = simulate_path(dyn, x0, pol, o);
    Trajectory b = simulate_path(dyn, x0, pol, o);
    CHECK(a.states == b.states);
    CHECK(a.times == b.times);
    auto e1 = draw_events(0.5, m.claims, 3.0, 42);
    auto e2 = draw_events(0.5, m.claims, 3.0, 42);
    REQUIRE(e1.size() == e2.size());
    for (std::size_t k = 0; k < e1.size(); ++k) {
        CHECK(e1[k].time == e2[k].time);
        CHECK(e1[k].size == e2[k].size);
    }
    CHECK(path_seed(1, 0) != path_seed(1, 1));
}

TEST_CASE("property: SIR paths stay in the triangle") {
    Gen gen(31);
    SirModel m = n2_model(0.9);
    Dynamics dyn = Dynamics::sir(m);
    for (int trial = 0; trial < 50; ++trial) {
        auto st = gen.state(2, -2.0, 2.0);
        SimOptions o;
        o.horizon = 2.0;
        o.seed = trial;
        Trajectory tr = simulate_path(dyn, to_flat(st), PolicySpec::constant({gen.uniform(0.5, 1.0), {1.0, 1.0}}), o);
        for (std::size_t k = 0; k < tr.size(); ++k) {
            auto x = tr.state(k);
            for (int j = 0; j < 2; ++j) {
                CHECK(x[j] >= -1e-12);
                CHECK(x[2 + j] >= -1e-12);
                CHECK(x[j] + x[2 + j] <= 1.0 + 1e-12);
            }
        }
    }
}

TEST_CASE("piecewise policy switches at the scheduled times") {
    SirModel m = n1_model(0.0);
    Dynamics dyn = Dynamics::sir(m);
    auto pol = PolicySpec::piecewise({{0.0, {1.0, {1.0}}}, {1.0, {0.5, {1.0}}}});
    CHECK(pol.breakpoints(3.0) == std::vector<double>{1.0});
    SimOptions o;
    o.horizon = 2.0;
    Trajectory tr = simulate_path(dyn, std::vector<double>{0.9, 0.05, 0.0}, pol, o);
    for (std::size_t k = 0; k + 1 < tr.size(); ++k) CHECK(tr.controls[k] == (tr.times[k] < 1.0 ? 0u : 1u));
    auto [s1, i1] = rk4_sir(0.9, 0.05, 3.0, 1.0, 1.0, 1.0);
    auto [s2, i2] = rk4_sir(s1, i1, 3.0, 1.0, 0.5, 1.0);
    CHECK(tr.final_state()[0] == doctest::Approx(s2).epsilon(1e-7));
    CHECK(tr.final_state()[1] == doctest::Approx(i2).epsilon(1e-7));
    CHECK_THROWS(PolicySpec::piecewise({{0.5, {1.0, {1.0}}}}));
}

TEST_CASE("policies are validated against the parameters") {
    SirParams p = sir_params({1.0}, {1.0}, {{1.0}});
    CHECK_THROWS_AS(PolicySpec::constant({0.1, {1.0}}).validate(p), ContractViolation);
    CHECK_THROWS_AS(PolicySpec::constant({1.0, {2.0}}).validate(p), ContractViolation);
}

TEST_CASE("occupation measure of frozen dynamics") {
    Dynamics dyn = Dynamics::frozen(3, ClaimLaw::dirac(1.0), 0.5, 2.0);
    std::vector<double> x0{0.3, 0.3, 1.5};
    OccupationOptions o;
    o.paths = 3;
    o.horizon = 20.0;
    o.record_dt = 0.02;
    OccupationMeasure occ = estimate_occupation(dyn, x0, PolicySpec::constant({1.0, {1.0}}), o);
    CHECK(occ.total_mass() == doctest::Approx(1.0).epsilon(1e-14));
    for (std::size_t k = 0; k < occ.size(); ++k)
        for (std::size_t d = 0; d < 3; ++d) CHECK(occ.atom_x(k)[d] == x0[d]);
    // a = e^{-2t} under e^{-t} dt: the a^k moment is 1 / (1 + 2k).
    for (double k : {1.0, 2.0, 3.0})
        CHECK(occ.integrate([&](double a, std::span<const double>) { return std::pow(a, k); }) ==
              doctest::Approx(1.0 / (1.0 + 2.0 * k)).epsilon(1e-4));
}

TEST_CASE("pure discount integral and its generator residual") {
    for (double h : {0.5, 1.0, 3.0}) {
        Dynamics pd = Dynamics::pure_discount(h);
        OccupationOptions o;
        o.paths = 1;
        o.horizon = 20.0;
        OccupationMeasure occ = estimate_occupation(pd, {}, PolicySpec::constant({1.0, {}}), o);
        double ia = occ.integrate([](double a, std::span<const double>) { return a; });
        CHECK(ia == doctest::Approx(1.0 / (1.0 + h)).epsilon(1e-3));
        auto res = generator_residuals(occ, pd, {}, 1.0, {TestFunction::a_power(1.0), TestFunction::constant(2.0)});
        CHECK(std::abs(res[0].residual) < 1e-3);
        CHECK(std::abs(res[1].residual) < 1e-12);
    }
}

TEST_CASE("generator residuals of a Monte-Carlo measure are within 3 SE") {
    SirModel m = n2_model();
    Dynamics dyn = Dynamics::sir(m);
    std::vector<double> x0{0.6, 0.7, 0.2, 0.1, 0.0};
    OccupationOptions o;
    o.paths = 2000;
    o.horizon = 16.0;
    o.seed = 3;
    OccupationMeasure occ = estimate_occupation(dyn, x0, PolicySpec::constant({1.0, {2.0, 1.5}}), o);
    std::vector<TestFunction> tests{TestFunction::constant(1.0), TestFunction::bump(x0, 0.5, 1.0),
                                    TestFunction::bump(x0, 1.0, 0.0)};
    auto res = generator_residuals(occ, dyn, x0, 1.0, tests);
    CHECK(std::abs(res[0].residual) < 1e-12);
    for (std::size_t k = 1; k < res.size(); ++k)
        CHECK(std::abs(res[k].residual) <= 3.0 * res[k].std_error + 1e-4);
}

TEST_CASE("harness: identical data and zero shaking give zero left sides") {
    SirModel m = n2_model();
    Dynamics dyn = Dynamics::sir(m);
    LipschitzProfile prof = sir_lipschitz_profile(m, 3, 6, 5);
    HarnessTrial t;
    t.x0 = {0.6, 0.7, 0.2, 0.1, 0.0};
    t.x0_other = t.x0;
    t.perturbation.assign(5, 0.0);
    t.control = {1.0, {1.0, 1.0}};
    t.paths = 200;
    HarnessReport r1 = moment_inequality_harness(dyn, prof, 1, t);
    CHECK(r1.passed);
    for (const auto& row : r1.rows) CHECK(row.lhs == 0.0);
    HarnessReport r2 = moment_inequality_harness(dyn, prof, 2, t);
    CHECK(r2.passed);
    for (const auto& row : r2.rows) CHECK(row.lhs == 0.0);
}

TEST_CASE("harness: paired paths from distinct data pass with margins") {
    SirModel m = n2_model();
    Dynamics dyn = Dynamics::sir(m);
    LipschitzProfile prof = sir_lipschitz_profile(m, 3, 6, 5);
    HarnessTrial t;
    t.x0 = {0.6, 0.7, 0.2, 0.1, 0.0};
    t.x0_other = {0.6, 0.7, 0.2, 0.1, 0.1};
    t.perturbation.assign(5, 0.05);
    t.control = {1.0, {2.0, 1.5}};
    t.paths = 2000;
    for (int spec : {1, 2, 3}) {
        HarnessReport r = moment_inequality_harness(dyn, prof, spec, t);
        CHECK(r.passed);
        CHECK(r.worst_margin >= 0.0);
        CHECK(r.rows.size() >= 3);
    }
}

TEST_CASE("harness spec 4 requires non-expansive jumps") {
    Dynamics lin = Dynamics::linear_contraction(2, 1.0, 0.5, ClaimLaw::dirac(1.0), 0.5, 2.0);
    LipschitzProfile prof = lipschitz_profile(lin, {{1.0, {}}}, {{0.0, 0.0}, {1.0, -1.0}, {0.5, 0.2}});
    CHECK(prof.jump_map_lip <= 1.0 + 1e-9);
    HarnessTrial t;
    t.x0 = {0.5, -0.5};
    t.x0_other = {0.4, -0.3};
    t.perturbation = {0.05, 0.05};
    t.control = {1.0, {}};
    t.paths = 1000;
    HarnessReport r = moment_inequality_harness(lin, prof, 4, t);
    CHECK(r.passed);

    LipschitzProfile bad = prof;
    bad.jump_map_lip = 1.5;
    CHECK_THROWS_AS(moment_inequality_harness(lin, bad, 4, t), PreconditionError);
}

TEST_CASE("premium drift vanishes when every edge has the same infection") {
    SirModel m;
    m.params = sir_params({2.0, 2.0}, {1.0, 1.0}, {{1.0, 1.0}}, 0.5);
    m.claims = ClaimLaw::dirac(1.0);
    NetworkState x0{{0.6, 0.6}, {0.2, 0.2}, 0.0};
    PremiumReport r = premium_drift_check(m, x0, {1.0, {1.0, 1.0}}, {0.1, 0.05}, 200, 1, PremiumClock::Frozen);
    CHECK(r.initial_premium == 0.0);
    for (const auto& row : r.rows) CHECK(row.ratio < 1e-12);
}
