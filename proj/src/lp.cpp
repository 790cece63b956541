#include "runmax/lp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "runmax/errors.hpp"

namespace runmax {

namespace {

double norm(std::span<const double> v) {
    double acc = 0.0;
    for (double x : v) acc += x * x;
    return std::sqrt(acc);
}

}  // namespace

LpProblem build_lp(const Dynamics& dyn, const StateGrid& grid, const std::vector<double>& a_nodes,
                   const std::vector<ControlPoint>& controls, double q, std::span<const double> x0,
                   const CostFn& cost, const LpBuildOptions& opts) {
    const std::size_t d = dyn.dim();
    if (dyn.sir_edges() > 2) throw ConfigError("LP path supports at most 2 edges; use the HJB solver for larger n");
    if (grid.dim() != d) throw ContractViolation("build_lp: grid dimension does not match dynamics");
    if (x0.size() != d) throw ContractViolation("build_lp: x0 has wrong dimension");
    if (!(q >= 2.0)) throw ConfigError("build_lp: q must be >= 2");
    if (controls.empty()) throw ConfigError("build_lp: empty control set");
    if (a_nodes.size() < 2 || a_nodes.front() != 0.0 || a_nodes.back() != 1.0)
        throw ConfigError("build_lp: a-nodes must run from 0 to 1");
    const double lambda = dyn.lambda();
    if (!(lambda < 1.0)) throw ConfigError("build_lp: lambda must be < 1");
    const double h = dyn.h();

    LpProblem prob;
    prob.xgrid = grid;
    prob.a_nodes = a_nodes;
    prob.controls = controls;
    prob.x0.assign(x0.begin(), x0.end());
    prob.q = q;
    prob.h = h;

    std::vector<double> z(a_nodes.size());
    for (std::size_t k = 0; k < z.size(); ++k) z[k] = std::pow(a_nodes[k], q);
    prob.zgrid = with_discount_axis(grid, z);

    const std::size_t nx = grid.size();
    const std::size_t na = a_nodes.size();
    const std::size_t nc = controls.size();
    const auto& ys = dyn.claims().support();
    const auto& ws = dyn.claims().weights();

    // per x-node data
    std::vector<double> log_cost(nx), moment(nx);
    double log_sup = -std::numeric_limits<double>::infinity();
    std::vector<double> xn(d);
    for (std::size_t m = 0; m < nx; ++m) {
        grid.node(m, xn);
        double l = cost(xn);
        if (!(l > 0.0) || !std::isfinite(l)) throw ConfigError("build_lp: running cost must be positive and finite");
        log_cost[m] = std::log(l);
        log_sup = std::max(log_sup, log_cost[m]);
        double r = norm(xn);
        moment[m] = r * r * r * r;
    }
    prob.cost_scale = std::exp(q * log_sup);

    // transitions per (x-node, control): x-upwind rates and jump spreads
    struct Transition {
        std::vector<NodeWeight> rates;
        std::vector<NodeWeight> jumps;  // lambda-weighted interpolation of post-jump points
    };
    std::vector<Transition> tr(nx * nc);
    double f_max = 0.0;
    std::vector<double> g_max(ys.size(), 0.0);
    std::vector<double> f(d), g(d), post(d);
    std::vector<NodeWeight> st;
    for (std::size_t m = 0; m < nx; ++m) {
        grid.node(m, xn);
        for (std::size_t c = 0; c < nc; ++c) {
            Transition& t = tr[m * nc + c];
            dyn.drift(xn, controls[c], f);
            f_max = std::max(f_max, norm(f));
            grid.upwind(m, f, t.rates);
            if (lambda > 0.0) {
                for (std::size_t k = 0; k < ys.size(); ++k) {
                    dyn.jump(xn, controls[c], ys[k], g);
                    g_max[k] = std::max(g_max[k], norm(g));
                    if (ws[k] == 0.0) continue;
                    for (std::size_t r = 0; r < d; ++r) post[r] = xn[r] + g[r];
                    try {
                        grid.interpolation(post, st);
                    } catch (const AssemblyError& e) {
                        throw AssemblyError("build_lp: post-jump point from node " + std::to_string(m) + ": " +
                                            e.what());
                    }
                    for (const auto& e : st) t.jumps.push_back({e.node, lambda * ws[k] * e.weight});
                }
            }
        }
    }
    double g4 = 0.0;
    for (std::size_t k = 0; k < ys.size(); ++k) g4 += ws[k] * std::pow(g_max[k], 4);
    double r0 = norm(x0);
    prob.moment_limit = std::pow(2.0 / (1.0 - lambda), 2) *
                        (std::pow(r0, 4) + std::pow(5.0, 4) * (std::pow(f_max, 4) + g4));

    LinearProgram& lp = prob.lp;
    for (std::size_t r = 0; r < na * nx; ++r) lp.add_row(0.0, RowSense::Equal);
    prob.hat_rows = na * nx;
    prob.mass_row = lp.add_row(1.0, RowSense::Equal);
    prob.moment_row = lp.add_row(prob.moment_limit, RowSense::LessEqual);
    grid.interpolation(x0, st);
    for (const auto& e : st) lp.rhs[(na - 1) * nx + e.node] += e.weight;

    std::vector<std::pair<std::uint32_t, double>> entries;
    for (std::size_t k = 0; k < na; ++k) {
        // discount transport along z = a^q: rate q h z_k / (z_k - z_{k-1}), exact on z
        double mu = k == 0 ? 0.0 : q * h * z[k] / (z[k] - z[k - 1]);
        std::size_t layer = k * nx;
        for (std::size_t m = 0; m < nx; ++m) {
            std::size_t c_end = (k == 0 && opts.single_control_at_zero) ? 1 : nc;
            for (std::size_t c = 0; c < c_end; ++c) {
                const Transition& t = tr[m * nc + c];
                entries.clear();
                auto own = static_cast<std::uint32_t>(layer + m);
                double diag = 1.0 + mu + (lambda > 0.0 ? lambda : 0.0);
                for (const auto& e : t.rates) {
                    diag += e.weight;
                    entries.push_back({static_cast<std::uint32_t>(layer + e.node), -e.weight});
                }
                if (mu > 0.0) entries.push_back({static_cast<std::uint32_t>(layer - nx + m), -mu});
                for (const auto& e : t.jumps) entries.push_back({static_cast<std::uint32_t>(layer + e.node), -e.weight});
                entries.push_back({own, diag});
                entries.push_back({static_cast<std::uint32_t>(prob.mass_row), 1.0});
                entries.push_back({static_cast<std::uint32_t>(prob.moment_row), moment[m]});
                double c_obj = k == 0 ? 0.0 : std::exp(q * (std::log(a_nodes[k]) + log_cost[m] - log_sup));
                lp.add_column(c_obj, entries);
                prob.col_a.push_back(static_cast<std::uint32_t>(k));
                prob.col_node.push_back(static_cast<std::uint32_t>(m));
                prob.col_control.push_back(static_cast<std::uint32_t>(c));
            }
        }
    }
    return prob;
}

LpSolution solve_lp(const LpProblem& prob, const SimplexOptions& opts) {
    LpSolution sol;
    sol.simplex = solve_simplex(prob.lp, opts);
    sol.status = sol.simplex.status;
    sol.duals = sol.simplex.duals;
    if (sol.status != LpStatus::Optimal) return sol;
    double obj = std::max(sol.simplex.objective, 0.0);
    sol.primal_value = obj * prob.cost_scale;
    sol.value_q = std::exp(std::log(prob.cost_scale) / prob.q) * std::pow(obj, 1.0 / prob.q);

    OccupationMeasure& occ = sol.measure;
    occ.dim = prob.xgrid.dim();
    occ.controls = prob.controls;
    occ.meta.paths = 1;
    occ.meta.quadrature = "lp";
    std::vector<double> xn(occ.dim);
    for (std::size_t j = 0; j < prob.lp.cols(); ++j) {
        double w = sol.simplex.x[j];
        if (w <= 0.0) continue;
        prob.xgrid.node(prob.col_node[j], xn);
        occ.push(prob.a_nodes[prob.col_a[j]], xn, prob.col_control[j], 0, w);
    }
    if (occ.size() > 0) occ.normalize();
    return sol;
}

double lp_value_q(const Dynamics& dyn, const StateGrid& grid, const std::vector<double>& a_nodes,
                  const std::vector<ControlPoint>& controls, double q, std::span<const double> x0,
                  const CostFn& cost, LpSolution* solution) {
    LpProblem prob = build_lp(dyn, grid, a_nodes, controls, q, x0, cost);
    LpSolution sol = solve_lp(prob);
    if (sol.status != LpStatus::Optimal)
        throw NonConvergence("LP solve ended with status " + to_string(sol.status), sol.simplex.primal_residual);
    double v = sol.value_q;
    if (solution) *solution = std::move(sol);
    return v;
}

DualReconstruction dual_as_test_function(const LpSolution& sol, const LpProblem& prob) {
    if (sol.status != LpStatus::Optimal) throw PreconditionError("dual reconstruction needs an optimal LP solution");
    const auto& y = sol.duals;
    const double scale = prob.cost_scale;
    DualReconstruction out;
    out.psi.resize(prob.hat_rows);
    for (std::size_t r = 0; r < prob.hat_rows; ++r) out.psi[r] = (y[r] + y[prob.mass_row]) * scale;
    out.moment_multiplier = y[prob.moment_row] * scale;

    const LinearProgram& lp = prob.lp;
    double worst = 0.0;
    for (std::size_t j = 0; j < lp.cols(); ++j) {
        double dot = 0.0;
        for (std::size_t k = lp.col_start[j]; k < lp.col_start[j + 1]; ++k) dot += lp.value[k] * y[lp.row_index[k]];
        worst = std::max(worst, dot - lp.cost[j]);
    }
    out.max_violation = worst * scale;

    double psi0 = 0.0;
    for (std::size_t r = 0; r < prob.hat_rows; ++r) psi0 += lp.rhs[r] * out.psi[r];
    out.psi_x0 = psi0;
    out.certified_bound = psi0 + prob.moment_limit * out.moment_multiplier;

    const std::size_t nx = prob.xgrid.size();
    const std::size_t top = (prob.a_nodes.size() - 1) * nx;
    out.min_psi_top = std::numeric_limits<double>::infinity();
    for (std::size_t m = 0; m < nx; ++m) out.min_psi_top = std::min(out.min_psi_top, out.psi[top + m]);
    return out;
}

void export_lp(const LpProblem& prob, std::ostream& os) {
    const LinearProgram& lp = prob.lp;
    os.precision(17);
    os << "# runmax occupation LP: minimize cost^T x subject to rows, x >= 0\n";
    os << "# q " << prob.q << " h " << prob.h << " cost_scale " << prob.cost_scale << "\n";
    os << "rows " << lp.rows << " cols " << lp.cols() << "\n";
    for (std::size_t i = 0; i < lp.rows; ++i)
        os << "row " << i << ' ' << (lp.sense[i] == RowSense::Equal ? 'E' : 'L') << ' ' << lp.rhs[i] << "\n";
    for (std::size_t j = 0; j < lp.cols(); ++j) {
        os << "col " << j << ' ' << lp.cost[j] << ' ' << (lp.col_start[j + 1] - lp.col_start[j]);
        for (std::size_t k = lp.col_start[j]; k < lp.col_start[j + 1]; ++k)
            os << ' ' << lp.row_index[k] << ':' << lp.value[k];
        os << "\n";
    }
}

}  // namespace runmax
