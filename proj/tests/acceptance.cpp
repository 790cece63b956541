// Acceptance suite: one line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "runmax/cost.hpp"
#include "runmax/errors.hpp"
#include "runmax/harness.hpp"
#include "runmax/hjb.hpp"
#include "runmax/lipschitz.hpp"
#include "runmax/lp.hpp"
#include "runmax/model.hpp"
#include "runmax/occupation.hpp"
#include "runmax/simulate.hpp"

using namespace runmax;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!ok) pass = false;
        if (!detail.empty()) detail += "; ";
        detail += (ok ? "" : "FAILED ") + what;
    }
};

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double relative(double a, double b) { return std::abs(a - b) / std::abs(b); }

// Distance to the fixed point left by stopping at sup change tol.
double iteration_slack(const SolveLog& log) {
    return log.contraction < 1.0 ? log.tol * log.contraction / (1.0 - log.contraction) : 0.0;
}

SirParams params(std::vector<double> beta, std::vector<double> gamma, std::vector<std::vector<double>> levels,
                 double lambda, double h) {
    SirParams p;
    p.n = beta.size();
    p.beta = std::move(beta);
    p.gamma = std::move(gamma);
    p.prev_levels = std::move(levels);
    p.lambda = lambda;
    p.h = h;
    p.validate();
    return p;
}

// Two edges, two protection levels, claims uniform on [0, 2] quantized to 8 points.
SirModel two_edge_model() {
    SirModel m;
    m.params = params({3.0, 2.0}, {1.0, 1.0}, {{1.0, 1.0}, {2.0, 1.5}}, 0.5, 1.0);
    m.claims = ClaimLaw::quantize([](double u) { return 2.0 * u; }, 8);
    return m;
}

const std::vector<double> kTwoEdgeX0{0.6, 0.7, 0.2, 0.1, 0.0};

// One edge without claims: deterministic SIR, L = 1 + 10 i.
SirModel deterministic_model() {
    SirModel m;
    m.params = params({6.0}, {1.0}, {{1.0}}, 0.0, 0.5);
    m.claims = ClaimLaw::dirac(1.0);
    return m;
}

// Brute force over constant lock-down levels: RK4 path, running max of e^{-ht}(1 + w i).
double running_max_oracle(double s, double i, double beta, double gamma, double h, double w,
                          const std::vector<double>& levels) {
    double best = std::numeric_limits<double>::infinity();
    const double dt = 1e-3;
    for (double u : levels) {
        auto rhs = [&](double a, double b, double& da, double& db) {
            da = -beta * u * a * b;
            db = beta * u * a * b - gamma * b;
        };
        double S = s, I = i, t = 0.0, peak = 1.0 + w * I;
        // Once e^{-ht} (1 + w) drops below the peak nothing later can exceed it.
        while (std::exp(-h * t) * (1.0 + w) > peak) {
            double k1s, k1i, k2s, k2i, k3s, k3i, k4s, k4i;
            rhs(S, I, k1s, k1i);
            rhs(S + 0.5 * dt * k1s, I + 0.5 * dt * k1i, k2s, k2i);
            rhs(S + 0.5 * dt * k2s, I + 0.5 * dt * k2i, k3s, k3i);
            rhs(S + dt * k3s, I + dt * k3i, k4s, k4i);
            S += dt / 6.0 * (k1s + 2.0 * k2s + 2.0 * k3s + k4s);
            I += dt / 6.0 * (k1i + 2.0 * k2i + 2.0 * k3i + k4i);
            t += dt;
            peak = std::max(peak, std::exp(-h * t) * (1.0 + w * I));
        }
        best = std::min(best, peak);
    }
    return best;
}

Outcome constant_cost_closed_form() {
    Outcome out;
    auto t0 = std::chrono::steady_clock::now();
    SirModel m;
    m.params = params({3.0}, {1.0}, {{1.0}}, 0.5, 1.0);
    m.claims = ClaimLaw::dirac(1.0);
    auto grid = std::make_shared<const StateGrid>(StateGrid::sir(1, 41, 21, m.params.truncation));
    SemiLagrangianScheme scheme(Dynamics::sir(m), grid, control_grid(m.params, 3), 1e-2);
    CostFn one = constant_cost(1.0);
    double worst = 0.0;
    for (double q : {2.0, 4.0, 8.0}) {
        ValueGrid v = vq_root(value_iteration_q(scheme, q, one));
        double exact = std::pow(1.0 + q, -1.0 / q);
        for (double x : v.values) worst = std::max(worst, std::abs(x - exact));
    }
    out.require(worst <= 1e-3, "max |V_q - (1+q)^(-1/q)| = " + num(worst) + " <= 1e-3");
    SweepReport sw = q_sweep(scheme, one, extended_q_list());
    double limit_err = 0.0;
    for (double x : sw.roots.back().values) limit_err = std::max(limit_err, std::abs(x - 1.0));
    out.require(limit_err <= 5e-3, "q=" + num(sw.q_list.back()) + " limit error " + num(limit_err) + " <= 5e-3");
    double secs = seconds_since(t0);
    out.require(secs < 10.0, "runtime " + num(secs) + " s < 10 s");
    return out;
}

Outcome frozen_identity() {
    Outcome out;
    Dynamics frozen = Dynamics::frozen(3, ClaimLaw::dirac(1.0), 0.5, 1.0);
    SirParams p = params({3.0}, {1.0}, {{1.0}}, 0.5, 1.0);
    CostSpec cs{1.0, 0.5, 4.0};
    CostFn L = sir_cost(cs, p);
    auto grid = std::make_shared<const StateGrid>(StateGrid::sir(1, 11, 5, p.truncation));
    SemiLagrangianScheme scheme(frozen, grid, control_grid(p, 3), 1e-2);
    ValueGrid v = obstacle_solve(scheme, L);
    double err = 0.0;
    for (std::size_t k = 0; k < grid->size(); ++k) err = std::max(err, std::abs(v.values[k] - L(grid->node(k))));
    out.require(err <= 1e-6, "obstacle sup |V - L| = " + num(err) + " <= 1e-6");

    Dynamics flat = Dynamics::frozen(2, ClaimLaw::dirac(1.0), 0.5, 1.0);
    std::vector<double> ax, ay;
    for (int k = 0; k <= 10; ++k) {
        ax.push_back(0.1 * k);
        ay.push_back(-1.0 + 0.2 * k);
    }
    StateGrid plane = StateGrid::rectangular({ax, ay});
    CostFn L2 = [](std::span<const double> x) { return 1.0 + x[0] + 0.25 * x[1] * x[1]; };
    // Off the nodes, so the start is spread over a cell by the hat weights.
    std::vector<double> x0{0.43, 0.37};
    for (double q : {2.0, 4.0}) {
        double lp = lp_value_q(flat, plane, discount_axis(2, 2.0), {{1.0, {}}, {0.5, {}}}, q, x0, L2);
        double exact = L2(x0) * std::pow(1.0 + q, -1.0 / q);
        out.require(std::abs(lp - exact) <= 1e-2,
                    "LP q=" + num(q) + " " + num(lp) + " vs " + num(exact) + " within 1e-2");
    }
    return out;
}

Outcome deterministic_oracle() {
    Outcome out;
    auto t0 = std::chrono::steady_clock::now();
    SirModel m = deterministic_model();
    CostSpec cs{1.0, 0.0, 10.0};
    CostFn L = sir_cost(cs, m.params);
    auto grid = std::make_shared<const StateGrid>(StateGrid::sir(1, 41, 3, m.params.truncation));
    auto controls = control_grid(m.params, 5);
    SemiLagrangianScheme scheme(Dynamics::sir(m), grid, controls, 1e-2);
    SweepReport sw = q_sweep(scheme, L, extended_q_list());
    ValueGrid ob = obstacle_solve(scheme, L);
    std::vector<double> levels;
    for (const auto& c : controls) levels.push_back(c.u);

    const std::vector<std::pair<double, double>> starts{{0.9, 0.05}, {0.8, 0.1}, {0.5, 0.2},  {0.3, 0.3},
                                                        {0.95, 0.02}, {0.6, 0.35}, {0.2, 0.1}, {0.7, 0.25},
                                                        {0.4, 0.05}, {0.1, 0.6}};
    double worst_sweep = 0.0, worst_obstacle = 0.0;
    for (auto [s, i] : starts) {
        std::vector<double> x{s, i, 0.0};
        double oracle = running_max_oracle(s, i, 6.0, 1.0, 0.5, 10.0, levels);
        worst_sweep = std::max(worst_sweep, relative(sw.roots.back().interp(x), oracle));
        worst_obstacle = std::max(worst_obstacle, relative(ob.interp(x), oracle));
    }
    out.require(worst_sweep <= 5e-2, "q sweep worst relative error " + num(worst_sweep) + " <= 5e-2");
    out.require(worst_obstacle <= 5e-2, "obstacle worst relative error " + num(worst_obstacle) + " <= 5e-2");
    double secs = seconds_since(t0);
    out.require(secs < 60.0, "runtime " + num(secs) + " s < 60 s");
    return out;
}

// LP solutions of the two-edge model are shared with the duality criterion.
struct TwoEdgeLp {
    double q;
    LpProblem prob;
    LpSolution sol;
};
std::vector<TwoEdgeLp> g_two_edge_lp;

Outcome cross_method_agreement() {
    Outcome out;
    auto t0 = std::chrono::steady_clock::now();
    SirModel m = two_edge_model();
    Dynamics dyn = Dynamics::sir(m);
    auto controls = control_grid(m.params, 3);
    CostSpec cs{1.0, 1.0, 1.0};
    CostFn L = sir_cost(cs, m.params);
    StateGrid grid = StateGrid::sir(2, 4, 5, m.params.truncation);
    SemiLagrangianScheme scheme(dyn, std::make_shared<const StateGrid>(grid), controls, 1e-2);
    for (double q : {2.0, 4.0}) {
        TwoEdgeLp run{q, build_lp(dyn, grid, discount_axis(1, 2.0), controls, q, kTwoEdgeX0, L), {}};
        run.sol = solve_lp(run.prob);
        double hjb = vq_root(value_iteration_q(scheme, q, L)).interp(kTwoEdgeX0);
        double rel = relative(run.sol.value_q, hjb);
        out.require(run.sol.status == LpStatus::Optimal && rel <= 7e-2,
                    "q=" + num(q) + " LP " + num(run.sol.value_q) + " HJB " + num(hjb) + " rel " + num(rel) +
                        " <= 7e-2");
        g_two_edge_lp.push_back(std::move(run));
    }
    double secs = seconds_since(t0);
    out.require(secs < 600.0, "runtime " + num(secs) + " s < 600 s");
    return out;
}

Outcome monotone_and_bounded() {
    Outcome out;
    struct Case {
        std::string name;
        Dynamics dyn;
        std::shared_ptr<const StateGrid> grid;
        std::vector<ControlPoint> controls;
        CostFn cost;
    };
    SirModel one = deterministic_model();
    SirModel jumpy;
    jumpy.params = params({3.0}, {1.0}, {{1.0}}, 0.5, 1.0);
    jumpy.claims = ClaimLaw({0.5, 1.5}, {0.5, 0.5});
    SirModel two = two_edge_model();
    CostSpec infection{1.0, 0.0, 10.0}, mixed{1.0, 1.0, 1.0};
    std::vector<Case> cases;
    cases.push_back({"n=1 deterministic", Dynamics::sir(one),
                     std::make_shared<const StateGrid>(StateGrid::sir(1, 21, 3, one.params.truncation)),
                     control_grid(one.params, 5), sir_cost(infection, one.params)});
    cases.push_back({"n=1 with claims", Dynamics::sir(jumpy),
                     std::make_shared<const StateGrid>(StateGrid::sir(1, 11, 5, jumpy.params.truncation)),
                     control_grid(jumpy.params, 3), sir_cost(mixed, jumpy.params)});
    cases.push_back({"n=2", Dynamics::sir(two),
                     std::make_shared<const StateGrid>(StateGrid::sir(2, 4, 5, two.params.truncation)),
                     control_grid(two.params, 3), sir_cost(mixed, two.params)});
    for (const auto& c : cases) {
        SemiLagrangianScheme scheme(c.dyn, c.grid, c.controls, 1e-2);
        SweepReport sw = q_sweep(scheme, c.cost, {2.0, 4.0, 8.0, 16.0});
        double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
        for (std::size_t k = 0; k < c.grid->size(); ++k) {
            lo = std::min(lo, c.cost(c.grid->node(k)));
            hi = std::max(hi, c.cost(c.grid->node(k)));
        }
        double mono = std::numeric_limits<double>::infinity(), bound = mono;
        for (std::size_t m = 0; m < sw.roots.size(); ++m) {
            const ValueGrid& v = sw.roots[m];
            double q = sw.q_list[m], slack = iteration_slack(v.log);
            for (std::size_t k = 0; k < v.values.size(); ++k) {
                if (m > 0) mono = std::min(mono, v.values[k] - sw.roots[m - 1].values[k] + 1e-6);
                bound = std::min({bound, v.values[k] - lo * std::pow(1.0 + q * scheme.h(), -1.0 / q) + slack,
                                  hi - v.values[k] + slack});
            }
        }
        out.require(mono >= 0.0, c.name + " monotone margin " + num(mono));
        out.require(bound >= 0.0, c.name + " bound margin " + num(bound));
    }
    return out;
}

Outcome duality_sandwich() {
    Outcome out;
    const double eps = 1e-2, q = 4.0;
    SirModel one;
    one.params = params({3.0}, {1.0}, {{1.0}}, 0.5, 1.0);
    one.claims = ClaimLaw({0.5, 1.5}, {0.5, 0.5});
    SirModel two = two_edge_model();
    CostSpec mixed{1.0, 1.0, 1.0};
    struct Case {
        std::string name;
        SirModel model;
        std::size_t side, x_nodes;
        std::vector<double> x0;
    };
    for (const Case& c : {Case{"n=1", one, 11, 5, {0.6, 0.2, 0.0}}, Case{"n=2", two, 4, 5, kTwoEdgeX0}}) {
        Dynamics dyn = Dynamics::sir(c.model);
        auto controls = control_grid(c.model.params, 3);
        CostFn L = sir_cost(mixed, c.model.params);
        auto grid = std::make_shared<const StateGrid>(StateGrid::sir(c.model.params.n, c.side, c.x_nodes,
                                                                     c.model.params.truncation));
        SemiLagrangianScheme scheme(dyn, grid, controls, 1e-2);
        ValueGrid v = vq_root(value_iteration_q(scheme, q, L));
        CertificateReport cr = dual_certificate_check(shifted(v, -eps), dyn, controls, q, L, c.x0);
        double gap = std::abs(v.interp(c.x0) - cr.bound);
        out.require(cr.violation >= -1e-6, c.name + " violation " + num(cr.violation) + " >= -1e-6");
        out.require(gap <= eps + 1e-3, c.name + " bound gap " + num(gap) + " <= eps + 1e-3");
    }
    // Every LP dual reconstruction lies below its primal value.
    SirModel lp_one = one;
    StateGrid g1 = StateGrid::sir(1, 11, 3, lp_one.params.truncation);
    Dynamics d1 = Dynamics::sir(lp_one);
    std::vector<std::pair<LpProblem, LpSolution>> runs;
    for (double qq : {2.0, 4.0}) {
        LpProblem prob = build_lp(d1, g1, discount_axis(1, 2.0), control_grid(lp_one.params, 3), qq,
                                  std::vector<double>{0.6, 0.2, 0.0}, sir_cost(mixed, lp_one.params));
        LpSolution sol = solve_lp(prob);
        runs.emplace_back(std::move(prob), std::move(sol));
    }
    for (auto& r : g_two_edge_lp) runs.emplace_back(r.prob, r.sol);
    double worst = std::numeric_limits<double>::infinity();
    for (auto& [prob, sol] : runs) {
        DualReconstruction dual = dual_as_test_function(sol, prob);
        worst = std::min(worst, sol.primal_value + 1e-8 - dual.psi_x0);
    }
    out.require(runs.size() == 4 && worst >= 0.0,
                std::to_string(runs.size()) + " LP duals, worst primal + 1e-8 - psi(x0) = " + num(worst));
    return out;
}

Outcome moment_harness() {
    Outcome out;
    auto t0 = std::chrono::steady_clock::now();
    struct Config {
        std::string name;
        SirModel model;
        std::vector<double> x0, x0_other;
        ControlPoint control;
        std::uint64_t seed;
    };
    SirModel one;
    one.params = params({3.0}, {1.0}, {{1.0}}, 0.5, 4.0);
    one.claims = ClaimLaw({0.5, 1.5}, {0.5, 0.5});
    SirModel two = two_edge_model();
    SirModel two_b = two;
    two_b.params.beta = {4.0, 1.5};
    two_b.params.gamma = {0.5, 1.5};
    std::vector<Config> configs{
        {"n=1", one, {0.7, 0.2, 0.0}, {0.2, 0.7, 0.5}, {1.0, {1.0}}, 101},
        {"n=2", two, kTwoEdgeX0, {0.7, 0.6, 0.1, 0.2, 0.3}, {1.0, {2.0, 1.5}}, 202},
        {"n=2 alt", two_b, {0.9, 0.5, 0.05, 0.3, -1.0}, {0.5, 0.8, 0.4, 0.1, 1.0}, {0.75, {1.0, 1.0}}, 303},
    };
    for (const auto& c : configs) {
        Dynamics dyn = Dynamics::sir(c.model);
        LipschitzProfile profile = sir_lipschitz_profile(c.model, 3, 11, 5);
        HarnessTrial trial;
        trial.x0 = c.x0;
        trial.x0_other = c.x0_other;
        trial.perturbation.assign(c.x0.size(), 0.1 / std::sqrt(double(c.x0.size())));
        trial.control = c.control;
        trial.paths = 10000;
        trial.seed = c.seed;
        for (int spec = 1; spec <= 3; ++spec) {
            HarnessReport r = moment_inequality_harness(dyn, profile, spec, trial);
            out.require(r.passed, c.name + " estimate " + std::to_string(spec) + " margin " + num(r.worst_margin));
        }
        // One edge: every post-jump map is the identity, so the L^q estimates apply.
        if (c.model.params.n == 1) {
            out.require(profile.jump_map_lip <= 1.0, "n=1 post-jump maps non-expansive");
            HarnessReport r = moment_inequality_harness(dyn, profile, 4, trial);
            out.require(r.passed, c.name + " L^q estimate margin " + num(r.worst_margin));
        }
    }
    double secs = seconds_since(t0);
    out.require(secs < 300.0, "runtime " + num(secs) + " s < 300 s");
    return out;
}

Outcome generator_identity() {
    Outcome out;
    SirModel m = two_edge_model();
    Dynamics dyn = Dynamics::sir(m);
    OccupationOptions oo;
    oo.paths = 10000;
    oo.seed = 17;
    oo.record_dt = oo.dt;
    PolicySpec policy = PolicySpec::constant({1.0, {2.0, 1.5}});
    OccupationMeasure occ = estimate_occupation(dyn, kTwoEdgeX0, policy, oo);

    auto agrid = std::make_shared<const StateGrid>(
        with_discount_axis(StateGrid::sir(2, 4, 5, m.params.truncation), {0.0, 0.5, 1.0}));
    std::vector<TestFunction> tests;
    for (std::size_t k = 0; k < 10; ++k) tests.push_back(TestFunction::hat(agrid, k * agrid->size() / 10));
    for (double radius : {0.25, 0.5, 1.0}) tests.push_back(TestFunction::bump(kTwoEdgeX0, radius, 1.0));
    double worst = std::numeric_limits<double>::infinity();
    std::string worst_name;
    for (const auto& r : generator_residuals(occ, dyn, kTwoEdgeX0, 1.0, tests)) {
        double margin = 3.0 * r.std_error - std::abs(r.residual);
        if (margin < worst) {
            worst = margin;
            worst_name = r.name;
        }
    }
    out.require(worst >= 0.0, "13 test functions, worst 3 SE - |residual| = " + num(worst) + " (" + worst_name + ")");

    const double h = 1.0;
    OccupationOptions po = oo;
    po.paths = 1;
    OccupationMeasure pm = estimate_occupation(Dynamics::pure_discount(h), {}, PolicySpec::constant({1.0, {}}), po);
    double ia = pm.integrate([](double a, std::span<const double>) { return a; });
    out.require(std::abs(ia - 1.0 / (1.0 + h)) <= 1e-3, "pure discount int a = " + num(ia) + " vs 1/(1+h)");
    return out;
}

Outcome net_premium_limit() {
    Outcome out;
    SirModel m = two_edge_model();
    NetworkState x0 = from_flat(kTwoEdgeX0, 2);
    ControlPoint ctrl{1.0, {1.0, 1.0}};
    const std::vector<double> ts{0.2, 0.1, 0.05};
    PremiumReport fair = premium_drift_check(m, x0, ctrl, ts, 100000, 29, PremiumClock::Frozen);
    out.require(fair.initial_premium > 0.0, "c0 = " + num(fair.initial_premium));
    bool decreasing = fair.rows[0].ratio > fair.rows[1].ratio && fair.rows[1].ratio > fair.rows[2].ratio;
    out.require(decreasing, "ratios " + num(fair.rows[0].ratio) + " > " + num(fair.rows[1].ratio) + " > " +
                                num(fair.rows[2].ratio));

    SirModel off = m;
    off.params.premium_offset = 0.5;
    PremiumReport shifted_rep = premium_drift_check(off, x0, ctrl, ts, 100000, 29, PremiumClock::Frozen);
    const PremiumRow& r = shifted_rep.rows.back();
    out.require(std::abs(r.ratio - 0.5) <= 3.0 * r.ratio_se,
                "offset 0.5 seen as " + num(r.ratio) + " +- " + num(r.ratio_se) + " at t=" + num(r.t));
    return out;
}

Outcome hamiltonian_limit() {
    Outcome out;
    const double nu = 4.0, mu = 1.0;
    std::vector<double> qs;
    for (double q = 2.0; q <= 64.0; q *= 2.0) qs.push_back(q);
    auto id = [](double, double r) { return r; };
    auto id_inf = [](double r) { return r; };
    const std::vector<double> w{0.5, 0.5};
    struct Case {
        std::string name;
        std::vector<double> alpha;
        std::vector<std::vector<double>> beta;
        // Limit computed by hand: min of alpha over controls whose claim values all stay <= nu.
        double limit;
    };
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<Case> cases{
        {"slack", {0.0, 0.5}, {{2.0, 3.0}, {1.5, 2.0}}, 0.0},
        {"empty", {0.0, 1.0}, {{8.0, 8.0}, {6.0, 2.0}}, inf},
        {"penalized", {0.0, 1.0}, {{2.0 * nu, 2.0 * nu}, {nu / 2.0, nu / 2.0}}, 1.0},
    };
    for (const auto& c : cases) {
        LimitProbeReport pr = hamiltonian_limit_probe(c.alpha, c.beta, w, id, id_inf, nu, mu, qs);
        out.require(pr.rhs == c.limit, c.name + " limit " + num(pr.rhs));
        if (std::isfinite(c.limit)) {
            double gap = std::abs(pr.rows.back().lhs - c.limit);
            out.require(gap <= 1e-2, c.name + " gap at q=64 " + num(gap));
        } else {
            bool growing = true;
            for (std::size_t k = 1; k < pr.rows.size(); ++k) growing = growing && pr.rows[k].lhs > pr.rows[k - 1].lhs;
            out.require(growing && pr.rows.back().lhs > 1e6, c.name + " diverges, lhs(64) = " + num(pr.rows.back().lhs));
        }
    }
    return out;
}

bool in_box(const NetworkState& st) {
    for (std::size_t j = 0; j < st.edges(); ++j)
        if (!(st.s[j] >= 0.0 && st.i[j] >= 0.0 && st.s[j] + st.i[j] <= 1.0)) return false;
    return true;
}

Outcome model_invariants() {
    Outcome out;
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    SirParams p3 = params({1.0, 1.0, 1.0}, {1.0, 1.0, 1.0}, {{1.0, 1.0, 1.0}, {2.0, 1.5, 3.0}}, 0.5, 1.0);
    SirParams p1 = params({1.0}, {1.0}, {{1.0}, {2.0}}, 0.5, 1.0);
    std::size_t violations = 0, moved = 0;
    for (int k = 0; k < 100000; ++k) {
        NetworkState st;
        for (int j = 0; j < 3; ++j) {
            double a = unit(rng), b = unit(rng);
            if (a + b > 1.0) {
                a = 1.0 - a;
                b = 1.0 - b;
            }
            st.s.push_back(a);
            st.i.push_back(b);
        }
        st.x = 10.0 * unit(rng) - 5.0;
        ControlPoint c{0.5 + 0.5 * unit(rng), p3.prev_levels[k % 2]};
        NetworkState post = sir_jump(st, c, 10.0 * unit(rng), p3);
        if (!in_box(post)) ++violations;

        NetworkState single;
        single.s = {st.s[0]};
        single.i = {st.i[0]};
        single.x = st.x;
        NetworkState same = sir_jump(single, {c.u, p1.prev_levels[k % 2]}, 10.0 * unit(rng), p1);
        if (same.s != single.s || same.i != single.i) ++moved;
    }
    out.require(violations == 0, std::to_string(violations) + " of 1e5 jumps left the triangle");
    out.require(moved == 0, std::to_string(moved) + " of 1e5 one-edge jumps moved the state");

    ClaimLaw claims = ClaimLaw::quantize([](double u) { return 2.0 * u; }, 8);
    std::size_t nonzero = 0;
    for (int k = 0; k < 1000; ++k) {
        double i = unit(rng);
        std::vector<double> s(3, 0.0), is(3, i);
        ControlPoint c{0.5 + 0.5 * unit(rng), p3.prev_levels[k % 2]};
        if (net_premium(s, is, c, p3, claims) != 0.0) ++nonzero;
    }
    out.require(nonzero == 0, "c0(i, i, i, p) = 0 exactly in " + std::to_string(1000 - nonzero) + " of 1000 draws");
    return out;
}

}  // namespace

int main() {
    struct Criterion {
        const char* name;
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> criteria{
        {"constant_cost_closed_form", constant_cost_closed_form},
        {"frozen_dynamics_identity", frozen_identity},
        {"deterministic_running_max_oracle", deterministic_oracle},
        {"lp_hjb_cross_method_agreement", cross_method_agreement},
        {"q_monotone_and_bounded", monotone_and_bounded},
        {"duality_sandwich", duality_sandwich},
        {"moment_inequality_harness", moment_harness},
        {"generator_identity", generator_identity},
        {"net_premium_limit", net_premium_limit},
        {"hamiltonian_limit_probe", hamiltonian_limit},
        {"model_invariants", model_invariants},
    };
    int failed = 0;
    for (std::size_t k = 0; k < criteria.size(); ++k) {
        auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[k].run();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("exception: ") + e.what();
        }
        if (!o.pass) ++failed;
        std::printf("%s %2zu %-34s [%6.1f s] %s\n", o.pass ? "PASS" : "FAIL", k + 1, criteria[k].name,
                    seconds_since(t0), o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria passed\n", int(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
