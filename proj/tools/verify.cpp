#include <algorithm>
#include <cmath>
#include <memory>
#include <ostream>

#include "app.hpp"
#include "runmax/errors.hpp"
#include "runmax/harness.hpp"
#include "runmax/hjb.hpp"
#include "runmax/lipschitz.hpp"
#include "runmax/lp.hpp"
#include "runmax/occupation.hpp"
#include "runmax/simulate.hpp"

namespace runmax::app {

using nlohmann::json;

namespace {

// Floor for generator residuals of measures with zero Monte-Carlo spread:
// time quadrature and horizon truncation leave an error of this order.
constexpr double kGeneratorFloor = 1e-4;
constexpr double kCrossTol = 7e-2;
constexpr double kEpsilon = 1e-2;

PolicySpec policy_of(const ScenarioConfig& cfg) {
    if (cfg.run.policy) return *cfg.run.policy;
    const auto& p = cfg.model.params;
    return PolicySpec::constant({p.u_max, p.prev_levels.front()});
}

std::shared_ptr<const StateGrid> hjb_grid(const ScenarioConfig& cfg) {
    const auto& p = cfg.model.params;
    return std::make_shared<const StateGrid>(StateGrid::sir(p.n, cfg.grid.si_side, cfg.grid.x_nodes, p.truncation));
}

double relative(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

void suite_moments(Context& ctx) {
    const auto& cfg = ctx.cfg;
    RunReport& rep = *ctx.report;
    Dynamics dyn = cfg.make_dynamics();
    LipschitzProfile profile =
        sir_lipschitz_profile(cfg.model, cfg.grid.u_levels, cfg.grid.si_side, cfg.grid.x_nodes);
    PolicySpec policy = policy_of(cfg);

    HarnessTrial trial;
    trial.x0 = cfg.x0_flat();
    NetworkState other = cfg.run.query.value_or(cfg.run.x0);
    if (!cfg.run.query) std::swap(other.s, other.i);
    trial.x0_other = to_flat(other);
    trial.perturbation = cfg.run.perturbation;
    if (trial.perturbation.empty()) trial.perturbation.assign(trial.x0.size(), 0.1 / std::sqrt(trial.x0.size()));
    trial.control = policy.controls().front();
    trial.paths = cfg.run.paths;
    trial.dt = cfg.run.dt;
    trial.seed = cfg.run.seed;
    trial.q = cfg.solver.q;

    json rows = json::array();
    for (int spec = 1; spec <= 4; ++spec) {
        std::string name = "moments_spec" + std::to_string(spec);
        try {
            Timer t(rep, name);
            HarnessReport hr = moment_inequality_harness(dyn, profile, spec, trial);
            rep.check(name, hr.worst_margin);
            for (const auto& r : hr.rows)
                rows.push_back({{"spec", spec}, {"t", r.t}, {"quantity", r.quantity}, {"lhs", r.lhs},
                                {"std_error", r.std_error}, {"rhs", r.rhs}, {"margin", r.margin}});
        } catch (const PreconditionError& e) {
            rep.skip(name, e.what());
        }
    }
    rep.results["rows"] = rows;
    rep.results["jump_map_lip"] = profile.jump_map_lip;
}

void suite_generator(Context& ctx) {
    const auto& cfg = ctx.cfg;
    RunReport& rep = *ctx.report;
    Dynamics dyn = cfg.make_dynamics();
    auto x0 = cfg.x0_flat();
    PolicySpec policy = policy_of(cfg);

    OccupationOptions oo;
    oo.paths = cfg.run.paths;
    oo.horizon = cfg.run.horizon;
    oo.dt = cfg.run.dt;
    oo.record_dt = cfg.run.record_dt;
    oo.seed = cfg.run.seed;
    OccupationMeasure occ = [&] {
        Timer t(rep, "occupation");
        return estimate_occupation(dyn, x0, policy, oo);
    }();

    auto agrid = std::make_shared<const StateGrid>(with_discount_axis(*hjb_grid(cfg), {0.0, 0.5, 1.0}));
    std::vector<TestFunction> tests;
    for (std::size_t k = 0; k < 10; ++k) tests.push_back(TestFunction::hat(agrid, k * agrid->size() / 10));
    for (double radius : {0.25, 0.5, 1.0}) tests.push_back(TestFunction::bump(x0, radius, 1.0));
    auto res = generator_residuals(occ, dyn, x0, 1.0, tests);
    json rows = json::array();
    for (const auto& r : res) {
        rep.check("generator_" + r.name, 3.0 * r.std_error + kGeneratorFloor - std::abs(r.residual));
        rows.push_back({{"test", r.name}, {"residual", r.residual}, {"std_error", r.std_error}});
    }
    rep.results["residuals"] = rows;

    // Discount-only process: the a-marginal integrates a to exactly 1/(1+h).
    const double h = cfg.model.params.h;
    Dynamics pd = Dynamics::pure_discount(h);
    OccupationOptions po = oo;
    po.paths = 1;
    OccupationMeasure pm = estimate_occupation(pd, {}, PolicySpec::constant({1.0, {}}), po);
    double ia = pm.integrate([](double a, std::span<const double>) { return a; });
    rep.results["pure_discount_integral"] = ia;
    rep.check("pure_discount_integral", 1e-3 - std::abs(ia - 1.0 / (1.0 + h)));
}

void suite_premium(Context& ctx) {
    const auto& cfg = ctx.cfg;
    RunReport& rep = *ctx.report;
    PolicySpec policy = policy_of(cfg);
    const ControlPoint& ctrl = policy.controls()[policy.select(0.0, cfg.x0_flat())];
    PremiumReport pr = [&] {
        Timer t(rep, "premium_drift");
        return premium_drift_check(cfg.model, cfg.run.x0, ctrl, cfg.run.t_values, cfg.run.paths, cfg.run.seed,
                                   cfg.run.premium_clock, cfg.run.dt);
    }();
    json rows = json::array();
    for (const auto& r : pr.rows)
        rows.push_back({{"t", r.t}, {"mean_increment", r.mean_increment}, {"std_error", r.std_error},
                        {"ratio", r.ratio}, {"ratio_se", r.ratio_se}});
    rep.results["rows"] = rows;
    rep.results["initial_premium"] = pr.initial_premium;

    double offset = std::abs(cfg.model.params.premium_offset);
    if (offset == 0.0) {
        // Ratios in order of decreasing t must decrease.
        std::vector<std::size_t> order(pr.rows.size());
        for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
        std::sort(order.begin(), order.end(), [&](auto a, auto b) { return pr.rows[a].t > pr.rows[b].t; });
        double margin = std::numeric_limits<double>::infinity();
        for (std::size_t k = 1; k < order.size(); ++k)
            margin = std::min(margin, pr.rows[order[k - 1]].ratio - pr.rows[order[k]].ratio);
        rep.check("premium_ratio_decreasing", margin);
    } else {
        auto smallest = std::min_element(pr.rows.begin(), pr.rows.end(),
                                         [](const auto& a, const auto& b) { return a.t < b.t; });
        rep.check("premium_offset_detected", 3.0 * smallest->ratio_se - std::abs(smallest->ratio - offset),
                  "offset " + fmt(offset) + ", ratio " + fmt(smallest->ratio));
    }
}

struct LpRun {
    LpProblem prob;
    LpSolution sol;
};

LpRun run_lp(const ScenarioConfig& cfg, const Dynamics& dyn) {
    const auto& p = cfg.model.params;
    StateGrid grid = StateGrid::sir(p.n, cfg.grid.si_side, cfg.grid.x_nodes, p.truncation);
    LpRun r;
    r.prob = build_lp(dyn, grid, discount_axis(cfg.grid.a_nodes, cfg.grid.a_ratio), cfg.controls(), cfg.solver.q,
                      cfg.x0_flat(), cfg.make_cost());
    r.sol = solve_lp(r.prob);
    if (r.sol.status != LpStatus::Optimal)
        throw NonConvergence("occupation LP ended with status " + to_string(r.sol.status),
                             r.sol.simplex.primal_residual);
    return r;
}

void suite_duality(Context& ctx) {
    const auto& cfg = ctx.cfg;
    RunReport& rep = *ctx.report;
    Dynamics dyn = cfg.make_dynamics();
    auto grid = hjb_grid(cfg);
    CostFn cost = cfg.make_cost();
    auto x0 = cfg.x0_flat();
    const double q = cfg.solver.q;
    SemiLagrangianScheme scheme(dyn, grid, cfg.controls(), cfg.solver.dt);
    ValueGrid v = [&] {
        Timer t(rep, "hjb");
        return vq_root(value_iteration_q(scheme, q, cost, {cfg.solver.dt, cfg.solver.tol, cfg.solver.max_sweeps}));
    }();
    double vx0 = v.interp(x0);
    CertificateReport cr = dual_certificate_check(shifted(v, -kEpsilon), dyn, cfg.controls(), q, cost, x0);
    rep.results["value_x0"] = vx0;
    rep.results["certificate"] = {{"violation", cr.violation},       {"bound", cr.bound},
                                  {"points_checked", cr.points_checked}, {"worst_node", cr.worst_node},
                                  {"worst_control", cr.worst_control},   {"epsilon", kEpsilon}};
    rep.check("certificate_violation", cr.violation + cr.tolerance);
    rep.check("certificate_bound", kEpsilon + 1e-3 - std::abs(vx0 - cr.bound));

    if (cfg.model.params.n > 2) {
        rep.skip("lp_dual_below_primal", "LP method supports n <= 2");
        return;
    }
    LpRun lp = [&] {
        Timer t(rep, "lp");
        return run_lp(cfg, dyn);
    }();
    DualReconstruction dual = dual_as_test_function(lp.sol, lp.prob);
    rep.results["lp"] = {{"primal_value", lp.sol.primal_value},
                         {"psi_x0", dual.psi_x0},
                         {"certified_bound", dual.certified_bound},
                         {"max_violation", dual.max_violation}};
    rep.check("lp_dual_below_primal", lp.sol.primal_value + 1e-8 - dual.psi_x0);
}

void suite_crosscheck(Context& ctx) {
    const auto& cfg = ctx.cfg;
    RunReport& rep = *ctx.report;
    Dynamics dyn = cfg.make_dynamics();
    auto grid = hjb_grid(cfg);
    CostFn cost = cfg.make_cost();
    auto x0 = cfg.x0_flat();
    HjbOptions ho{cfg.solver.dt, cfg.solver.tol, cfg.solver.max_sweeps};
    SemiLagrangianScheme scheme(dyn, grid, cfg.controls(), cfg.solver.dt);

    double hjb = [&] {
        Timer t(rep, "hjb");
        return vq_root(value_iteration_q(scheme, cfg.solver.q, cost, ho)).interp(x0);
    }();
    rep.results["hjb_value_q"] = hjb;
    if (cfg.model.params.n <= 2) {
        LpRun lp = [&] {
            Timer t(rep, "lp");
            return run_lp(cfg, dyn);
        }();
        rep.results["lp_value_q"] = lp.sol.value_q;
        rep.check("lp_vs_hjb", kCrossTol - relative(lp.sol.value_q, hjb));
    } else {
        rep.skip("lp_vs_hjb", "LP method supports n <= 2");
    }

    SweepReport sw = [&] {
        Timer t(rep, "sweep");
        return q_sweep(scheme, cost, cfg.solver.q_list, ho);
    }();
    ValueGrid ob = [&] {
        Timer t(rep, "obstacle");
        return obstacle_solve(scheme, cost,
                              {cfg.solver.dt, cfg.solver.tol, cfg.solver.max_sweeps, cfg.solver.band_factor});
    }();
    double top = sw.roots.back().interp(x0);
    double obs = ob.interp(x0);
    rep.results["sweep_limit"] = top;
    rep.results["sweep_q"] = sw.q_list.back();
    rep.results["obstacle_value"] = obs;
    rep.check("obstacle_vs_sweep", kCrossTol - relative(obs, top));
}

void suite_limit(Context& ctx) {
    RunReport& rep = *ctx.report;
    const double nu = 4.0;
    const double mu = 1.0;
    std::vector<double> q_list;
    for (double q = 2.0; q <= 64.0; q *= 2.0) q_list.push_back(q);
    auto id = [](double, double r) { return r; };
    auto id_inf = [](double r) { return r; };

    struct Case {
        std::string name;
        std::vector<double> alpha;
        std::vector<std::vector<double>> beta;
    };
    // beta is [control][claim] over a two-point claim law.
    std::vector<Case> cases = {
        {"slack_constraint", {0.0, 0.5}, {{2.0, 3.0}, {1.5, 2.0}}},
        {"empty_constraint", {0.0, 1.0}, {{8.0, 8.0}, {6.0, 2.0}}},
        {"penalized_control", {0.0, 1.0}, {{2.0 * nu, 2.0 * nu}, {nu / 2.0, nu / 2.0}}},
    };
    const std::vector<double> w{0.5, 0.5};
    json out = json::array();
    for (const auto& c : cases) {
        LimitProbeReport pr = hamiltonian_limit_probe(c.alpha, c.beta, w, id, id_inf, nu, mu, q_list);
        json rows = json::array();
        for (const auto& r : pr.rows)
            rows.push_back({{"q", r.q}, {"lhs", r.lhs}, {"gap", std::isfinite(r.gap) ? json(r.gap) : json(nullptr)},
                            {"argmin", r.argmin}});
        out.push_back({{"case", c.name},
                       {"rhs", std::isfinite(pr.rhs) ? json(pr.rhs) : json(nullptr)},
                       {"rows", rows}});
        if (std::isfinite(pr.rhs)) {
            rep.check("limit_" + c.name, 1e-2 - std::abs(pr.rows.back().gap));
        } else {
            // Divergence: the left side keeps growing along the schedule.
            double growth = std::numeric_limits<double>::infinity();
            for (std::size_t k = 1; k < pr.rows.size(); ++k)
                growth = std::min(growth, pr.rows[k].lhs - pr.rows[k - 1].lhs);
            rep.check("limit_" + c.name, growth);
        }
    }
    rep.results["cases"] = out;
}

}  // namespace

void cmd_verify(Context& ctx, const std::string& suite) {
    if (suite != "hamiltonian-limit") discount_check(ctx);
    if (suite == "moments") suite_moments(ctx);
    else if (suite == "generator") suite_generator(ctx);
    else if (suite == "premium") suite_premium(ctx);
    else if (suite == "duality") suite_duality(ctx);
    else if (suite == "crosscheck") suite_crosscheck(ctx);
    else if (suite == "hamiltonian-limit") suite_limit(ctx);
    else throw ConfigError("unknown suite '" + suite + "'");
}

}  // namespace runmax::app
