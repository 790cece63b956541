#include <algorithm>
#include <cmath>
#include <fstream>
#include <memory>
#include <ostream>

#include "app.hpp"
#include "runmax/errors.hpp"
#include "runmax/hjb.hpp"
#include "runmax/lp.hpp"
#include "runmax/simulate.hpp"

namespace runmax::app {

using nlohmann::json;

namespace {

std::vector<std::string> state_columns(std::size_t n) {
    std::vector<std::string> cols;
    for (std::size_t j = 1; j <= n; ++j) cols.push_back("s" + std::to_string(j));
    for (std::size_t j = 1; j <= n; ++j) cols.push_back("i" + std::to_string(j));
    cols.push_back("x");
    return cols;
}

std::string joined(const std::vector<std::string>& cols, const std::string& prefix = "") {
    std::string out;
    for (std::size_t k = 0; k < cols.size(); ++k) out += (k ? "," : "") + prefix + cols[k];
    return out;
}

PolicySpec policy_of(const ScenarioConfig& cfg) {
    if (cfg.run.policy) return *cfg.run.policy;
    const auto& p = cfg.model.params;
    return PolicySpec::constant({p.u_max, p.prev_levels.front()});
}

json state_json(std::span<const double> x) { return std::vector<double>(x.begin(), x.end()); }

struct CostRange {
    double lo = 0.0;
    double hi = 0.0;
    std::vector<double> values;
};

CostRange cost_range(const StateGrid& grid, const CostFn& cost) {
    CostRange r;
    std::vector<double> x(grid.dim());
    for (std::size_t k = 0; k < grid.size(); ++k) {
        grid.node(k, x);
        r.values.push_back(cost(x));
    }
    r.lo = *std::min_element(r.values.begin(), r.values.end());
    r.hi = *std::max_element(r.values.begin(), r.values.end());
    return r;
}

json grid_json(const StateGrid& g) {
    return {{"describe", g.describe()}, {"dim", g.dim()}, {"nodes", g.size()}, {"min_spacing", g.min_spacing()}};
}

json log_json(const SolveLog& log) {
    std::size_t keep = std::min<std::size_t>(log.sup_change.size(), 50);
    std::vector<double> tail(log.sup_change.end() - keep, log.sup_change.end());
    return {{"sweeps", log.sweeps},  {"dt", log.dt},        {"tol", log.tol},
            {"contraction", log.contraction}, {"converged", log.converged}, {"band", log.band},
            {"band_widened", log.band_widened}, {"sup_change_tail", tail}};
}

// Value bounds inf L (1 + qh)^{-1/q} <= V_q <= sup L, or L <= V <= sup L for the running max,
// up to the distance to the fixed point left by stopping at sup change tol.
void bounds_check(RunReport& rep, const std::string& name, const ValueGrid& v, const CostRange& lr, double h) {
    double margin = std::numeric_limits<double>::infinity();
    const double c = v.log.contraction;
    double slack = 1e-12 * lr.hi + (c < 1.0 ? v.log.tol * c / (1.0 - c) : 0.0);
    for (std::size_t k = 0; k < v.values.size(); ++k) {
        double lower = std::isfinite(v.q) ? lr.lo * std::pow(1.0 + v.q * h, -1.0 / v.q) : lr.values[k];
        margin = std::min({margin, v.values[k] - lower + slack, lr.hi - v.values[k] + slack});
    }
    rep.check(name, margin);
}

std::shared_ptr<const StateGrid> hjb_grid(const ScenarioConfig& cfg) {
    const auto& p = cfg.model.params;
    return std::make_shared<const StateGrid>(StateGrid::sir(p.n, cfg.grid.si_side, cfg.grid.x_nodes, p.truncation));
}

void write_root_csv(Context& ctx, const ValueGrid& v, const std::string& name) {
    auto os = ctx.open_csv(name);
    write_value_csv(v, os);
}

void write_sidecar(Context& ctx, const std::string& name, const json& j) {
    auto os = ctx.open_json(name);
    os << j.dump(2) << "\n";
}

void value_lp(Context& ctx) {
    const auto& cfg = ctx.cfg;
    const auto& p = cfg.model.params;
    RunReport& rep = *ctx.report;
    if (p.n > 2)
        throw ConfigError(cfg.source + ": method lp supports n <= 2 edges, the config has n = " + std::to_string(p.n));
    Dynamics dyn = cfg.make_dynamics();
    StateGrid grid = StateGrid::sir(p.n, cfg.grid.si_side, cfg.grid.x_nodes, p.truncation);
    auto a_nodes = discount_axis(cfg.grid.a_nodes, cfg.grid.a_ratio);
    auto x0 = cfg.x0_flat();
    LpProblem prob;
    LpSolution sol;
    {
        Timer t(rep, "assemble");
        prob = build_lp(dyn, grid, a_nodes, cfg.controls(), cfg.solver.q, x0, cfg.make_cost());
    }
    {
        Timer t(rep, "solve");
        sol = solve_lp(prob);
    }
    if (sol.status != LpStatus::Optimal)
        throw NonConvergence("occupation LP ended with status " + to_string(sol.status),
                             sol.simplex.primal_residual);
    DualReconstruction dual = dual_as_test_function(sol, prob);

    {
        auto os = ctx.open_csv("value.csv");
        os << joined(state_columns(p.n)) << ",V\n";
        for (double v : x0) os << fmt(v) << ",";
        os << fmt(sol.value_q) << "\n";
    }
    {
        auto os = ctx.open_csv("lp_measure.csv");
        os << "a," << joined(state_columns(p.n)) << ",control,weight\n";
        const auto& m = sol.measure;
        for (std::size_t k = 0; k < m.size(); ++k) {
            os << fmt(m.a[k]);
            for (double v : m.atom_x(k)) os << "," << fmt(v);
            os << "," << m.control[k] << "," << fmt(m.weight[k]) << "\n";
        }
    }
    json side = {{"method", "lp"},
                 {"q", cfg.solver.q},
                 {"grid", grid_json(grid)},
                 {"a_nodes", a_nodes},
                 {"controls", cfg.controls().size()},
                 {"rows", prob.lp.rows},
                 {"columns", prob.col_node.size()},
                 {"cost_scale", prob.cost_scale},
                 {"value_q", sol.value_q},
                 {"primal_value", sol.primal_value},
                 {"simplex",
                  {{"status", to_string(sol.status)},
                   {"iterations", sol.simplex.iterations},
                   {"primal_residual", sol.simplex.primal_residual},
                   {"dual_violation", sol.simplex.dual_violation},
                   {"complementarity", sol.simplex.complementarity},
                   {"perturbed", sol.simplex.perturbed}}},
                 {"dual",
                  {{"psi_x0", dual.psi_x0},
                   {"certified_bound", dual.certified_bound},
                   {"max_violation", dual.max_violation},
                   {"moment_multiplier", dual.moment_multiplier},
                   {"min_psi_top", dual.min_psi_top}}}};
    write_sidecar(ctx, "value.json", side);
    rep.results["value_x0"] = sol.value_q;
    rep.results["primal_value"] = sol.primal_value;
    rep.check("dual_below_primal", sol.primal_value + 1e-8 - dual.psi_x0);
}

void value_hjb(Context& ctx) {
    const auto& cfg = ctx.cfg;
    RunReport& rep = *ctx.report;
    Dynamics dyn = cfg.make_dynamics();
    auto grid = hjb_grid(cfg);
    CostFn cost = cfg.make_cost();
    auto x0 = cfg.x0_flat();
    SemiLagrangianScheme scheme = [&] {
        Timer t(rep, "assemble");
        return SemiLagrangianScheme(dyn, grid, cfg.controls(), cfg.solver.dt);
    }();
    HjbOptions opts{cfg.solver.dt, cfg.solver.tol, cfg.solver.max_sweeps};
    ValueGrid w = [&] {
        Timer t(rep, "solve");
        return value_iteration_q(scheme, cfg.solver.q, cost, opts);
    }();
    ValueGrid v = vq_root(w);
    write_root_csv(ctx, v, "value.csv");
    double vx0 = v.interp(x0);
    write_sidecar(ctx, "value.json",
                  {{"method", "hjb"},
                   {"q", cfg.solver.q},
                   {"grid", grid_json(*grid)},
                   {"scheme", {{"dt", scheme.dt()}, {"h", scheme.h()}, {"lambda", scheme.lambda()},
                               {"controls", scheme.controls().size()}, {"claims", scheme.claims()}}},
                   {"convergence", log_json(w.log)},
                   {"value_x0", vx0}});
    rep.results["value_x0"] = vx0;
    rep.check("converged", cfg.solver.tol - w.log.sup_change.back());
    bounds_check(rep, "bounds", v, cost_range(*grid, cost), scheme.h());
}

void value_sweep(Context& ctx) {
    const auto& cfg = ctx.cfg;
    RunReport& rep = *ctx.report;
    Dynamics dyn = cfg.make_dynamics();
    auto grid = hjb_grid(cfg);
    CostFn cost = cfg.make_cost();
    auto x0 = cfg.x0_flat();
    SemiLagrangianScheme scheme(dyn, grid, cfg.controls(), cfg.solver.dt);
    HjbOptions opts{cfg.solver.dt, cfg.solver.tol, cfg.solver.max_sweeps};
    SweepReport sw = [&] {
        Timer t(rep, "solve");
        return q_sweep(scheme, cost, cfg.solver.q_list, opts);
    }();

    {
        auto os = ctx.open_csv("value.csv");
        os << joined(state_columns(cfg.model.params.n));
        for (double q : sw.q_list) os << ",V_q" << fmt(q);
        os << "\n";
        for (std::size_t k = 0; k < grid->size(); ++k) {
            for (double c : grid->node(k)) os << fmt(c) << ",";
            for (std::size_t m = 0; m < sw.roots.size(); ++m) os << (m ? "," : "") << fmt(sw.roots[m].values[k]);
            os << "\n";
        }
    }
    if (ctx.emit_plot_data) {
        auto os = ctx.open_csv("value_long.csv");
        os << "node,q,V\n";
        for (std::size_t m = 0; m < sw.roots.size(); ++m)
            for (std::size_t k = 0; k < grid->size(); ++k)
                os << k << "," << fmt(sw.q_list[m]) << "," << fmt(sw.roots[m].values[k]) << "\n";
    }

    json per_q = json::array();
    json logs = json::array();
    double mono = std::numeric_limits<double>::infinity();
    CostRange lr = cost_range(*grid, cost);
    for (std::size_t m = 0; m < sw.roots.size(); ++m) {
        per_q.push_back({{"q", sw.q_list[m]}, {"value_x0", sw.roots[m].interp(x0)}});
        logs.push_back(log_json(sw.roots[m].log));
        bounds_check(rep, "bounds_q" + fmt(sw.q_list[m]), sw.roots[m], lr, scheme.h());
        if (m > 0)
            for (std::size_t k = 0; k < grid->size(); ++k)
                mono = std::min(mono, sw.roots[m].values[k] - sw.roots[m - 1].values[k] + 1e-6);
    }
    if (sw.roots.size() > 1) rep.check("q_monotone", mono);
    write_sidecar(ctx, "value.json",
                  {{"method", "sweep"},
                   {"q_list", sw.q_list},
                   {"grid", grid_json(*grid)},
                   {"scheme", {{"dt", scheme.dt()}, {"h", scheme.h()}, {"lambda", scheme.lambda()}}},
                   {"sup_increment", sw.sup_increment},
                   {"unstable_nodes", sw.unstable_nodes.size()},
                   {"convergence", logs}});
    rep.results["per_q"] = per_q;
    rep.results["value_x0"] = per_q.back()["value_x0"];
    rep.results["unstable_nodes"] = sw.unstable_nodes.size();
}

void value_obstacle(Context& ctx) {
    const auto& cfg = ctx.cfg;
    RunReport& rep = *ctx.report;
    Dynamics dyn = cfg.make_dynamics();
    auto grid = hjb_grid(cfg);
    CostFn cost = cfg.make_cost();
    auto x0 = cfg.x0_flat();
    SemiLagrangianScheme scheme(dyn, grid, cfg.controls(), cfg.solver.dt);
    ObstacleOptions opts{cfg.solver.dt, cfg.solver.tol, cfg.solver.max_sweeps, cfg.solver.band_factor};
    ValueGrid v = [&] {
        Timer t(rep, "solve");
        return obstacle_solve(scheme, cost, opts);
    }();
    write_root_csv(ctx, v, "value.csv");
    double vx0 = v.interp(x0);
    write_sidecar(ctx, "value.json",
                  {{"method", "obstacle"},
                   {"grid", grid_json(*grid)},
                   {"scheme", {{"dt", scheme.dt()}, {"h", scheme.h()}, {"band_factor", opts.band_factor}}},
                   {"convergence", log_json(v.log)},
                   {"value_x0", vx0}});
    rep.results["value_x0"] = vx0;
    rep.check("converged", cfg.solver.tol - v.log.sup_change.back());
    bounds_check(rep, "barrier", v, cost_range(*grid, cost), scheme.h());
}

}  // namespace

void cmd_simulate(Context& ctx) {
    const auto& cfg = ctx.cfg;
    RunReport& rep = *ctx.report;
    const std::size_t n = cfg.model.params.n;
    Dynamics dyn = cfg.make_dynamics();
    PolicySpec policy = policy_of(cfg);
    policy.validate(cfg.model.params);
    auto x0 = cfg.x0_flat();

    SimOptions so;
    so.horizon = cfg.run.horizon;
    so.dt = cfg.run.dt;
    so.seed = path_seed(cfg.run.seed, 0);
    so.perturbation = cfg.run.perturbation;
    Trajectory tr = [&] {
        Timer t(rep, "trajectory");
        return simulate_path(dyn, x0, policy, so);
    }();

    auto cols = state_columns(n);
    {
        auto os = ctx.open_csv("trajectory.csv");
        os << "t,a," << joined(cols) << ",control,jump_flag\n";
        for (std::size_t k = 0; k < tr.size(); ++k) {
            os << fmt(tr.times[k]) << "," << fmt(tr.a[k]);
            for (double v : tr.state(k)) os << "," << fmt(v);
            os << "," << tr.controls[k] << "," << int(tr.jump_flags[k]) << "\n";
        }
    }
    double max_increment = 0.0;
    {
        auto os = ctx.open_csv("jumps.csv");
        os << "t,claim,size," << joined(cols, "d_") << "\n";
        std::size_t j = 0;
        for (std::size_t k = 0; k < tr.size(); ++k) {
            if (!tr.jump_flags[k]) continue;
            const auto& ev = tr.events[j];
            os << fmt(tr.times[k]) << "," << ev.claim << "," << fmt(ev.size);
            auto st = tr.state(k);
            for (std::size_t d = 0; d < tr.dim; ++d) {
                double inc = st[d] - tr.left_limits[j * tr.dim + d];
                max_increment = std::max(max_increment, std::abs(inc));
                os << "," << fmt(inc);
            }
            os << "\n";
            ++j;
        }
    }
    if (ctx.emit_plot_data) {
        auto os = ctx.open_csv("trajectory_long.csv");
        os << "t,variable,value\n";
        for (std::size_t k = 0; k < tr.size(); ++k)
            for (std::size_t d = 0; d < tr.dim; ++d)
                os << fmt(tr.times[k]) << "," << cols[d] << "," << fmt(tr.state(k)[d]) << "\n";
    }

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
    {
        auto os = ctx.open_csv("occupation.csv");
        os << "a," << joined(cols) << ",control,path,weight\n";
        for (std::size_t k = 0; k < occ.size(); ++k) {
            os << fmt(occ.a[k]);
            for (double v : occ.atom_x(k)) os << "," << fmt(v);
            os << "," << occ.control[k] << "," << occ.path[k] << "," << fmt(occ.weight[k]) << "\n";
        }
    }
    if (!occ.meta.warning.empty()) rep.warnings.push_back(occ.meta.warning);

    rep.results["jumps"] = tr.events.size();
    rep.results["max_jump_increment"] = max_increment;
    rep.results["final_state"] = state_json(tr.final_state());
    rep.results["occupation"] = {{"atoms", occ.size()},
                                 {"paths", occ.meta.paths},
                                 {"tail_mass", occ.meta.tail_mass},
                                 {"quadrature", occ.meta.quadrature}};
    rep.check("occupation_mass", 1e-12 - std::abs(occ.total_mass() - 1.0));
}

void cmd_value(Context& ctx, const std::string& method) {
    discount_check(ctx);
    if (method == "lp") value_lp(ctx);
    else if (method == "hjb") value_hjb(ctx);
    else if (method == "sweep") value_sweep(ctx);
    else if (method == "obstacle") value_obstacle(ctx);
    else throw ConfigError("unknown method '" + method + "'");
}

void cmd_premium(Context& ctx) {
    const auto& cfg = ctx.cfg;
    const auto& p = cfg.model.params;
    NetworkState st = cfg.run.query.value_or(cfg.run.x0);
    PolicySpec policy = policy_of(cfg);
    std::vector<double> flat = to_flat(st);
    const ControlPoint& ctrl = policy.controls()[policy.select(0.0, flat)];
    check_control(ctrl, p);
    double c0 = net_premium(st.s, st.i, ctrl, p, cfg.model.claims);
    double rate = premium_rate(st.s, st.i, ctrl, p, cfg.model.claims);
    *ctx.log << "c0 = " << fmt(c0) << "\n";
    ctx.report->results["state"] = state_json(flat);
    ctx.report->results["control"] = {{"u", ctrl.u}, {"p", ctrl.p}};
    ctx.report->results["net_premium"] = c0;
    ctx.report->results["premium_rate"] = rate;
    ctx.report->results["mean_infection"] = mean_infection(st.i);
}

}  // namespace runmax::app
