#include <cmath>

#include "doctest.h"
#include "gen.hpp"
#include "runmax/claim_law.hpp"
#include "runmax/cost.hpp"
#include "runmax/dynamics.hpp"
#include "runmax/errors.hpp"
#include "runmax/lipschitz.hpp"
#include "runmax/model.hpp"

using namespace runmax;
using testgen::Gen;
using testgen::sir_params;

TEST_CASE("claim law moments are exact sums") {
    ClaimLaw law({0.0, 1.0, 3.0}, {0.25, 0.5, 0.25});
    CHECK(law.mean() == doctest::Approx(1.25));
    CHECK(law.moment4() == doctest::Approx(0.5 + 0.25 * 81.0));
    CHECK(law.max_support() == 3.0);
    CHECK(law.expect([](double y) { return y * y; }) == doctest::Approx(0.5 + 2.25));
    CHECK(law.sample_index(0.0) == 0);
    CHECK(law.sample_index(0.3) == 1);
    CHECK(law.sample_index(0.99) == 2);
}

TEST_CASE("claim law rejects bad input") {
    CHECK_THROWS_AS(ClaimLaw({}, {}), ConfigError);
    CHECK_THROWS_AS(ClaimLaw({1.0}, {0.5}), ConfigError);
    CHECK_THROWS_AS(ClaimLaw({-1.0}, {1.0}), ConfigError);
    CHECK_THROWS_AS(ClaimLaw({1.0, 2.0}, {1.5, -0.5}), ConfigError);
}

TEST_CASE("quantized uniform law sits at midpoint quantiles") {
    ClaimLaw law = ClaimLaw::quantize([](double u) { return 2.0 * u; }, 8);
    REQUIRE(law.size() == 8);
    for (std::size_t k = 0; k < 8; ++k) {
        CHECK(law.support()[k] == doctest::Approx((k + 0.5) / 4.0));
        CHECK(law.weights()[k] == doctest::Approx(0.125));
    }
    CHECK(law.mean() == doctest::Approx(1.0));
}

TEST_CASE("parameter validation") {
    SirParams p = sir_params({2.0}, {1.0}, {{1.0}});
    CHECK_NOTHROW(p.validate());
    p.lambda = 1.0;
    CHECK_THROWS_AS(p.validate(), ConfigError);
    p.lambda = 0.5;
    p.prev_levels = {{0.5}};
    CHECK_THROWS_AS(p.validate(), ConfigError);
    p.prev_levels = {{1.0}};
    p.beta = {-1.0};
    CHECK_THROWS_AS(p.validate(), ConfigError);
}

TEST_CASE("drift at a disease-free state only moves capital") {
    SirParams p = sir_params({2.0}, {1.0}, {{1.0}});
    ClaimLaw claims = ClaimLaw::dirac(1.0);
    NetworkState st{{0.7}, {0.0}, 0.0};
    auto v = sir_drift(st, {1.0, {1.0}}, p, claims);
    CHECK(v[0] == 0.0);
    CHECK(v[1] == 0.0);
    CHECK(v[2] == premium_rate(st.s, st.i, {1.0, {1.0}}, p, claims));
}

TEST_CASE("drift by hand") {
    SirParams p = sir_params({2.0}, {1.0}, {{1.0}});
    NetworkState st{{0.5}, {0.2}, 0.0};
    auto v = sir_drift(st, {1.0, {1.0}}, p, ClaimLaw::dirac(1.0));
    CHECK(v[0] == doctest::Approx(-0.2));
    CHECK(v[1] == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("equal infection levels give zero capital drift for any protection") {
    SirParams p = sir_params({1.0, 2.0}, {0.5, 0.5}, {{1.0, 1.0}, {3.0, 7.0}});
    NetworkState st{{0.4, 0.2}, {0.3, 0.3}, 1.0};
    for (const auto& lvl : p.prev_levels) {
        auto v = sir_drift(st, {0.8, lvl}, p, ClaimLaw::dirac(2.0));
        CHECK(v[4] == 0.0);
    }
}

TEST_CASE("jumps by hand") {
    SirParams p = sir_params({1.0, 1.0}, {1.0, 1.0}, {{1.0, 1.0}, {10.0, 10.0}});
    NetworkState st{{0.5, 0.2}, {0.2, 0.4}, 0.0};
    NetworkState out = sir_jump(st, {1.0, {1.0, 1.0}}, 1.0, p);
    CHECK(out.i[0] == doctest::Approx(0.3));
    CHECK(out.i[1] == 0.4);
    CHECK(out.s[0] == 0.5);
    CHECK(out.s[1] == 0.2);
    CHECK(out.x == doctest::Approx(-0.1));

    NetworkState same = sir_jump(st, {1.0, {10.0, 10.0}}, 1.0, p);
    CHECK(same.s == st.s);
    CHECK(same.i == st.i);
    CHECK(same.x == st.x);
}

TEST_CASE("property: jumps stay in the triangle and never lower infection") {
    Gen gen(11);
    for (int trial = 0; trial < 10000; ++trial) {
        std::size_t n = 1 + gen.index(4);
        SirParams p = sir_params(std::vector<double>(n, 1.0), std::vector<double>(n, 1.0), {gen.protection(n)});
        NetworkState st = gen.state(n);
        ControlPoint c{gen.uniform(0.5, 1.0), p.prev_levels[0]};
        double y = gen.uniform(0.0, 5.0);
        NetworkState out = sir_jump(st, c, y, p);
        REQUIRE(out.in_triangle());
        for (std::size_t j = 0; j < n; ++j) {
            CHECK(out.i[j] >= st.i[j]);
            CHECK(out.s[j] <= st.s[j]);
            CHECK(out.s[j] >= 0.0);
        }
        CHECK(out.x <= st.x);
    }
}

TEST_CASE("property: a single edge never jumps") {
    Gen gen(12);
    for (int trial = 0; trial < 2000; ++trial) {
        SirParams p = sir_params({1.0}, {1.0}, {gen.protection(1)});
        NetworkState st = gen.state(1);
        NetworkState out = sir_jump(st, {gen.uniform(0.5, 1.0), p.prev_levels[0]}, gen.uniform(0.0, 10.0), p);
        CHECK(out.s == st.s);
        CHECK(out.i == st.i);
        CHECK(out.x == st.x);
    }
}

TEST_CASE("net premium by hand") {
    SirParams p = sir_params({1.0, 1.0}, {1.0, 1.0}, {{1.0, 1.0}});
    p.lambda = 0.5;
    ClaimLaw claims({1.0, 3.0}, {0.5, 0.5});
    std::vector<double> s{0.5, 0.5}, i{0.1, 0.5};
    CHECK(net_premium(s, i, {1.0, {1.0, 1.0}}, p, claims) == doctest::Approx(0.2));
}

TEST_CASE("property: net premium vanishes for equal infection and for one edge") {
    Gen gen(13);
    ClaimLaw claims({0.5, 2.0}, {0.3, 0.7});
    for (int trial = 0; trial < 2000; ++trial) {
        std::size_t n = 1 + gen.index(5);
        SirParams p = sir_params(std::vector<double>(n, 1.0), std::vector<double>(n, 1.0), {gen.protection(n)});
        double c = gen.uniform(0.0, 1.0);
        std::vector<double> s(n, 0.0), i(n, c);
        CHECK(net_premium(s, i, {gen.uniform(0.5, 1.0), p.prev_levels[0]}, p, claims) == 0.0);
        NetworkState one = gen.state(1);
        SirParams p1 = sir_params({1.0}, {1.0}, {gen.protection(1)});
        CHECK(net_premium(one.s, one.i, {1.0, p1.prev_levels[0]}, p1, claims) == 0.0);
    }
}

TEST_CASE("premium offset shifts the rate") {
    SirParams p = sir_params({1.0, 1.0}, {1.0, 1.0}, {{1.0, 1.0}});
    ClaimLaw claims = ClaimLaw::dirac(2.0);
    std::vector<double> s{0.5, 0.5}, i{0.1, 0.5};
    double base = premium_rate(s, i, {1.0, {1.0, 1.0}}, p, claims);
    p.premium_offset = 0.5;
    CHECK(premium_rate(s, i, {1.0, {1.0, 1.0}}, p, claims) == doctest::Approx(base + 0.5));
}

TEST_CASE("premium table interpolates bilinearly") {
    PremiumTable t;
    t.i_mean = {0.0, 1.0};
    t.u = {0.0, 1.0};
    t.values = {{{0.0, 1.0}, {2.0, 3.0}}};
    CHECK(t.eval(0, 0.5, 0.5) == doctest::Approx(1.5));
    CHECK(t.eval(0, 0.25, 1.0) == doctest::Approx(1.5));
    CHECK(t.eval(0, 2.0, -1.0) == doctest::Approx(2.0));
}

TEST_CASE("truncation taper is C1 and matches the window") {
    Truncation tr;
    CHECK(tr.taper(0.0) == 1.0);
    CHECK(tr.taper(tr.x_hi) == 1.0);
    CHECK(tr.taper(tr.box_hi()) == 0.0);
    CHECK(tr.taper(tr.box_lo() - 1.0) == 0.0);
    double e = 1e-6;
    double slope_in = (tr.taper(tr.x_hi + e) - tr.taper(tr.x_hi)) / e;
    double slope_out = (tr.taper(tr.box_hi()) - tr.taper(tr.box_hi() - e)) / e;
    CHECK(std::abs(slope_in) < 1e-4);
    CHECK(std::abs(slope_out) < 1e-4);
}

TEST_CASE("sir dynamics delegates to the model functions") {
    SirModel m;
    m.params = sir_params({1.5, 2.5}, {0.7, 1.1}, {{1.0, 1.0}, {2.0, 3.0}});
    m.claims = ClaimLaw({0.5, 1.5}, {0.5, 0.5});
    Dynamics dyn = Dynamics::sir(m);
    NetworkState st{{0.4, 0.6}, {0.3, 0.1}, 0.5};
    ControlPoint c{0.8, {2.0, 3.0}};
    auto flat = to_flat(st);
    auto f = dyn.drift(flat, c);
    auto ref = sir_drift(st, c, m.params, m.claims);
    for (std::size_t k = 0; k < f.size(); ++k) CHECK(f[k] == ref[k]);
    auto g = dyn.jump(flat, c, 1.5);
    auto post = to_flat(sir_jump(st, c, 1.5, m.params));
    for (std::size_t k = 0; k < g.size(); ++k) CHECK(flat[k] + g[k] == doctest::Approx(post[k]));
}

TEST_CASE("frozen and pure-discount dynamics") {
    Dynamics fz = Dynamics::frozen(3, ClaimLaw::dirac(1.0), 0.5, 1.0);
    std::vector<double> x{0.2, 0.3, 1.0};
    for (double v : fz.drift(x, {1.0, {1.0}})) CHECK(v == 0.0);
    for (double v : fz.jump(x, {1.0, {1.0}}, 1.0)) CHECK(v == 0.0);
    Dynamics pd = Dynamics::pure_discount(2.0);
    CHECK(pd.dim() == 0);
    CHECK(pd.h() == 2.0);
    CHECK_THROWS_AS(fz.drift(std::vector<double>{1.0}, {1.0, {1.0}}), ContractViolation);
}

TEST_CASE("cost is positive and bounded by its weights") {
    SirParams p = sir_params({1.0}, {1.0}, {{1.0}});
    CostSpec cs{1.0, 2.0, 3.0};
    CostFn L = sir_cost(cs, p);
    Gen gen(14);
    for (int k = 0; k < 500; ++k) {
        auto x = to_flat(gen.state(1, -8.0, 8.0));
        double v = L(x);
        CHECK(v >= 1.0);
        CHECK(v <= 1.0 + 2.0 + 3.0 + 1e-12);
    }
    CHECK_THROWS_AS(constant_cost(0.0), ConfigError);
}

TEST_CASE("lipschitz profile of a zero drift") {
    SirModel m;
    m.params = sir_params({0.0}, {0.0}, {{1.0}});
    m.claims = ClaimLaw::dirac(0.0);
    LipschitzProfile prof = sir_lipschitz_profile(m, 3, 11, 11);
    CHECK(prof.f_bound == 0.0);
    CHECK(prof.f_lip == doctest::Approx(0.0).epsilon(1e-6));
    CHECK(prof.g_bound[0] == 0.0);
}

TEST_CASE("lipschitz constant against a difference-quotient oracle") {
    SirModel m;
    m.params = sir_params({2.0}, {1.0}, {{1.0}});
    m.claims = ClaimLaw::dirac(1.0);
    LipschitzProfile prof = sir_lipschitz_profile(m, 5, 21, 11);
    // Sup of |f(a) - f(b)| / |a - b| over neighbouring points of a 50 x 50 lattice, u in {0.5, 1}.
    double oracle = 0.0;
    const int N = 50;
    for (double u : {0.5, 1.0}) {
        auto f = [&](double s, double i) {
            return std::pair{-2.0 * u * s * i, (2.0 * u * s - 1.0) * i};
        };
        for (int a = 0; a < N; ++a)
            for (int b = 0; a + b < N; ++b) {
                double s = a / double(N), i = b / double(N), d = 1.0 / N;
                auto [f0, f1] = f(s, i);
                for (auto [ds, di] : {std::pair{d, 0.0}, std::pair{0.0, d}}) {
                    auto [g0, g1] = f(s + ds, i + di);
                    oracle = std::max(oracle, std::hypot(g0 - f0, g1 - f1) / std::hypot(ds, di));
                }
            }
    }
    CHECK(prof.f_lip >= 0.95 * oracle);
    CHECK(prof.f_lip <= 1.5 * oracle);
}

TEST_CASE("discount check") {
    SirModel m;
    m.params = sir_params({2.0}, {1.0}, {{1.0}});
    m.claims = ClaimLaw::dirac(1.0);
    LipschitzProfile prof = sir_lipschitz_profile(m, 3, 11, 5);
    DiscountCheck loose = check_discount(0.1, 0.5, prof, m.claims, false);
    CHECK_FALSE(loose.ok);
    CHECK_FALSE(loose.message.empty());
    CHECK_THROWS_AS(check_discount(0.1, 0.5, prof, m.claims, true), ConfigError);
    DiscountCheck big = check_discount(1e3, 0.5, prof, m.claims, true);
    CHECK(big.ok);
    CHECK(big.required == doctest::Approx(std::max(big.moment_bound, big.lipschitz_bound) * 1.0).epsilon(0.2));
}
