#include "runmax/hjb.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

#include "runmax/errors.hpp"

namespace runmax {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string node_label(const StateGrid& grid, std::size_t node) {
    std::ostringstream os;
    os << "node " << node << " (";
    auto x = grid.node(node);
    for (std::size_t k = 0; k < x.size(); ++k) os << (k ? ", " : "") << x[k];
    os << ")";
    return os.str();
}

// log(e^a + e^b) with -inf allowed on either side.
double log_add(double a, double b) {
    if (a == -kInf) return b;
    if (b == -kInf) return a;
    double m = std::max(a, b);
    return m + std::log1p(std::exp(-std::abs(a - b)));
}

struct CostRange {
    std::vector<double> log_l;
    double log_sup = -kInf;
    double log_inf = kInf;
};

CostRange cost_on_nodes(const StateGrid& grid, const CostFn& cost) {
    CostRange r;
    r.log_l.resize(grid.size());
    std::vector<double> x(grid.dim());
    for (std::size_t m = 0; m < grid.size(); ++m) {
        grid.node(m, x);
        double l = cost(x);
        if (!(l > 0.0) || !std::isfinite(l))
            throw PreconditionError("running cost must be positive and finite at " + node_label(grid, m));
        r.log_l[m] = std::log(l);
        r.log_sup = std::max(r.log_sup, r.log_l[m]);
        r.log_inf = std::min(r.log_inf, r.log_l[m]);
    }
    return r;
}

double dot_row(std::span<const NodeWeight> row, const std::vector<double>& v) {
    double acc = 0.0;
    for (const auto& e : row) acc += e.weight * v[e.node];
    return acc;
}


void check_q(double q) {
    if (!(q >= 2.0) || !std::isfinite(q)) throw ConfigError("q must be finite and >= 2");
}

}  // namespace

double ValueGrid::log_at(std::size_t node) const {
    double v = values.at(node);
    return kind == Kind::Power ? v : std::log(v);
}

double ValueGrid::interp(std::span<const double> x) const {
    if (kind != Kind::Root) throw ContractViolation("interp expects a root grid");
    return grid->interpolate(values, x);
}

SemiLagrangianScheme::SemiLagrangianScheme(const Dynamics& dyn, std::shared_ptr<const StateGrid> grid,
                                           std::vector<ControlPoint> controls, double dt)
    : grid_(std::move(grid)), controls_(std::move(controls)), dt_(dt), h_(dyn.h()), lambda_(dyn.lambda()) {
    if (!grid_) throw ContractViolation("semi-Lagrangian scheme needs a grid");
    if (grid_->dim() != dyn.dim())
        throw ContractViolation("grid dimension " + std::to_string(grid_->dim()) + " does not match dynamics " +
                                std::to_string(dyn.dim()));
    if (controls_.empty()) throw ConfigError("empty control grid");
    if (!(dt > 0.0)) throw ConfigError("dt must be > 0");
    if (lambda_ * dt >= 1.0) throw ConfigError("lambda * dt must be < 1");

    const auto& law = dyn.claims();
    claim_weights_ = law.weights();
    const std::size_t d = dyn.dim();
    std::vector<double> x(d), f(d), g(d), p(d);
    std::vector<NodeWeight> w;

    for (std::size_t m = 0; m < grid_->size(); ++m) {
        grid_->node(m, x);
        for (std::size_t c = 0; c < controls_.size(); ++c) {
            dyn.drift(x, controls_[c], f);
            for (std::size_t k = 0; k < d; ++k) p[k] = x[k] + dt * f[k];
            try {
                grid_->interpolation(p, w);
            } catch (const AssemblyError& e) {
                throw AssemblyError("foot point of " + node_label(*grid_, m) + " under control " +
                                    std::to_string(c) + ": " + e.what());
            }
            foot_.entries.insert(foot_.entries.end(), w.begin(), w.end());
            foot_.start.push_back(foot_.entries.size());

            for (std::size_t k = 0; k < law.size(); ++k) {
                dyn.jump(x, controls_[c], law.support()[k], g);
                for (std::size_t j = 0; j < d; ++j) p[j] = x[j] + g[j];
                try {
                    grid_->interpolation(p, w);
                } catch (const AssemblyError& e) {
                    throw AssemblyError("post-jump point of " + node_label(*grid_, m) + " under control " +
                                        std::to_string(c) + ", claim " + std::to_string(k) + ": " + e.what());
                }
                jump_.entries.insert(jump_.entries.end(), w.begin(), w.end());
                jump_.start.push_back(jump_.entries.size());
            }
        }
    }
}

std::span<const NodeWeight> SemiLagrangianScheme::foot(std::size_t node, std::size_t control) const {
    return foot_.row(node * controls_.size() + control);
}

std::span<const NodeWeight> SemiLagrangianScheme::post_jump(std::size_t node, std::size_t control,
                                                            std::size_t claim) const {
    return jump_.row((node * controls_.size() + control) * claim_weights_.size() + claim);
}

namespace {

class PowerSweep {
public:
    PowerSweep(const SemiLagrangianScheme& scheme, double q, const CostFn& cost)
        : s_(scheme), q_(q) {
        const double rho = 1.0 + q * scheme.h();
        log_d_ = -rho * scheme.dt();
        const double log_a = std::log(-std::expm1(log_d_) / rho);
        auto range = cost_on_nodes(scheme.grid(), cost);
        running_.resize(scheme.nodes());
        for (std::size_t m = 0; m < running_.size(); ++m) running_[m] = log_a + q * range.log_l[m];
        stay_ = 1.0 - scheme.lambda() * scheme.dt();
        for (double w : scheme.claim_weights()) jump_w_.push_back(scheme.lambda() * scheme.dt() * w);
        post_.assign(jump_w_.size(), 0.0);
    }

    double contraction() const { return std::exp(log_d_ / q_); }

    /// log W after one sweep at node m, with the minimizing control.
    double node(std::size_t m, const std::vector<double>& v, std::uint32_t& arg) const {
        double best = kInf;
        const std::size_t nc = s_.controls().size();
        for (std::size_t c = 0; c < nc; ++c) {
            double vf = dot_row(s_.foot(m, c), v);
            double top = vf;
            for (std::size_t k = 0; k < post_.size(); ++k) {
                post_[k] = jump_w_[k] > 0.0 ? dot_row(s_.post_jump(m, c, k), v) : 0.0;
                top = std::max(top, post_[k]);
            }
            double mix = -kInf;
            if (top > 0.0) {
                double acc = stay_ * (vf == top ? 1.0 : std::pow(vf / top, q_));
                for (std::size_t k = 0; k < post_.size(); ++k)
                    if (jump_w_[k] > 0.0) acc += jump_w_[k] * (post_[k] == top ? 1.0 : std::pow(post_[k] / top, q_));
                mix = q_ * std::log(top) + std::log(acc);
            }
            double lw = log_add(running_[m], log_d_ + mix);
            if (lw < best) {
                best = lw;
                arg = static_cast<std::uint32_t>(c);
            }
        }
        return best;
    }

private:
    const SemiLagrangianScheme& s_;
    double q_;
    double log_d_;
    double stay_;
    std::vector<double> running_;
    std::vector<double> jump_w_;
    mutable std::vector<double> post_;
};

}  // namespace

ValueGrid value_iteration_q(const SemiLagrangianScheme& scheme, double q, const CostFn& cost,
                            const HjbOptions& opts) {
    check_q(q);
    if (!(opts.tol > 0.0)) throw ConfigError("tol must be > 0");
    PowerSweep sweep(scheme, q, cost);
    const std::size_t nn = scheme.nodes();

    ValueGrid out;
    out.grid = scheme.grid_ptr();
    out.q = q;
    out.kind = ValueGrid::Kind::Power;
    out.argmin.assign(nn, 0);
    out.log.dt = scheme.dt();
    out.log.tol = opts.tol;
    out.log.contraction = sweep.contraction();

    std::vector<double> v(nn, 0.0), next(nn), lw(nn);
    double change = kInf;
    for (std::size_t k = 0; k < opts.max_sweeps; ++k) {
        change = 0.0;
        for (std::size_t m = 0; m < nn; ++m) {
            lw[m] = sweep.node(m, v, out.argmin[m]);
            next[m] = std::exp(lw[m] / q);
            change = std::max(change, std::abs(next[m] - v[m]));
        }
        v.swap(next);
        out.log.sup_change.push_back(change);
        out.log.sweeps = k + 1;
        if (change <= opts.tol) {
            out.log.converged = true;
            break;
        }
    }
    if (!out.log.converged)
        throw NonConvergence("value iteration for q=" + std::to_string(q) + " exceeded " +
                                 std::to_string(opts.max_sweeps) + " sweeps",
                             change);
    out.values = std::move(lw);
    return out;
}

ValueGrid value_iteration_q(const Dynamics& dyn, std::shared_ptr<const StateGrid> grid,
                            const std::vector<ControlPoint>& controls, double q, const CostFn& cost,
                            const HjbOptions& opts) {
    SemiLagrangianScheme scheme(dyn, std::move(grid), controls, opts.dt);
    return value_iteration_q(scheme, q, cost, opts);
}

std::vector<double> apply_operator(const SemiLagrangianScheme& scheme, double q, const CostFn& cost,
                                   std::span<const double> v) {
    check_q(q);
    if (v.size() != scheme.nodes()) throw ContractViolation("apply_operator: value vector has wrong size");
    for (double x : v)
        if (!(x >= 0.0)) throw ContractViolation("apply_operator: values must be >= 0");
    PowerSweep sweep(scheme, q, cost);
    std::vector<double> in(v.begin(), v.end()), out(v.size());
    std::uint32_t arg = 0;
    for (std::size_t m = 0; m < v.size(); ++m) out[m] = std::exp(sweep.node(m, in, arg) / q);
    return out;
}

ValueGrid vq_root(const ValueGrid& w) {
    if (w.kind != ValueGrid::Kind::Power || !std::isfinite(w.q))
        throw ContractViolation("vq_root expects a finite-q power grid");
    ValueGrid v = w;
    v.kind = ValueGrid::Kind::Root;
    for (std::size_t m = 0; m < w.values.size(); ++m) {
        if (!std::isfinite(w.values[m]))
            throw ContractViolation("vq_root: W is not positive and finite at node " + std::to_string(m));
        v.values[m] = std::exp(w.values[m] / w.q);
    }
    return v;
}

ValueGrid shifted(const ValueGrid& v, double delta) {
    if (v.kind != ValueGrid::Kind::Root) throw ContractViolation("shifted expects a root grid");
    ValueGrid out = v;
    for (double& x : out.values) x += delta;
    return out;
}

std::vector<double> default_q_list() { return {2, 4, 8, 16, 32}; }

std::vector<double> extended_q_list() {
    std::vector<double> out;
    for (double q = 2; q <= 2048; q *= 2) out.push_back(q);
    return out;
}

SweepReport q_sweep(const SemiLagrangianScheme& scheme, const CostFn& cost, const std::vector<double>& q_list,
                    const HjbOptions& opts, double mono_tol) {
    if (q_list.empty()) throw ConfigError("q_sweep: empty q list");
    for (std::size_t k = 1; k < q_list.size(); ++k)
        if (!(q_list[k] > q_list[k - 1])) throw ConfigError("q_sweep: q list must be increasing");

    SweepReport rep;
    rep.q_list = q_list;
    std::vector<double> last_inc;
    for (std::size_t k = 0; k < q_list.size(); ++k) {
        rep.roots.push_back(vq_root(value_iteration_q(scheme, q_list[k], cost, opts)));
        if (k == 0) continue;
        const auto& prev = rep.roots[k - 1].values;
        const auto& cur = rep.roots[k].values;
        double sup = -kInf;
        last_inc.assign(cur.size(), 0.0);
        for (std::size_t m = 0; m < cur.size(); ++m) {
            double inc = cur[m] - prev[m];
            if (inc < -mono_tol) {
                std::ostringstream os;
                os << "V_q decreased from q=" << q_list[k - 1] << " to q=" << q_list[k] << " at "
                   << node_label(scheme.grid(), m) << " by " << -inc;
                throw ConsistencyError(os.str());
            }
            last_inc[m] = inc;
            sup = std::max(sup, inc);
        }
        rep.sup_increment.push_back(sup);
    }
    if (!last_inc.empty()) {
        const auto& cur = rep.roots.back().values;
        for (std::size_t m = 0; m < cur.size(); ++m)
            if (last_inc[m] > rep.stabilization_tol * cur[m]) rep.unstable_nodes.push_back(m);
    }
    return rep;
}

namespace {

double max_post_jump(const ValueGrid& psi, std::span<const double> x, const ControlPoint& u, const Dynamics& dyn,
                     std::vector<double>& g) {
    const auto& law = dyn.claims();
    double worst = -kInf;
    for (std::size_t k = 0; k < law.size(); ++k) {
        if (!(law.weights()[k] > 0.0)) continue;
        dyn.jump(x, u, law.support()[k], g);
        for (std::size_t j = 0; j < g.size(); ++j) g[j] += x[j];
        worst = std::max(worst, psi.interp(g));
    }
    return worst;
}

}  // namespace

std::vector<std::size_t> constrained_controls(const ValueGrid& psi, std::size_t node, double r,
                                              const Dynamics& dyn, const std::vector<ControlPoint>& controls) {
    auto x = psi.grid->node(node);
    std::vector<double> g(x.size());
    std::vector<std::size_t> out;
    for (std::size_t c = 0; c < controls.size(); ++c)
        if (max_post_jump(psi, x, controls[c], dyn, g) <= r) out.push_back(c);
    return out;
}

HamiltonianValue constrained_hamiltonian(const ValueGrid& psi, std::size_t node, double r,
                                         std::span<const double> p, const Dynamics& dyn,
                                         const std::vector<ControlPoint>& controls) {
    auto x = psi.grid->node(node);
    if (p.size() != x.size()) throw ContractViolation("constrained_hamiltonian: gradient has wrong length");
    HamiltonianValue best;
    std::vector<double> f(x.size());
    for (std::size_t c : constrained_controls(psi, node, r, dyn, controls)) {
        dyn.drift(x, controls[c], f);
        double v = 0.0;
        for (std::size_t j = 0; j < f.size(); ++j) v += p[j] * f[j];
        if (v < best.value || !best.control) {
            best.value = v;
            best.control = c;
        }
    }
    return best;
}

namespace {

// Largest one-step change |psi(foot) - psi(node)| over nodes and controls.
double step_increment(const SemiLagrangianScheme& scheme, const std::vector<double>& psi) {
    double out = 0.0;
    for (std::size_t m = 0; m < scheme.nodes(); ++m)
        for (std::size_t c = 0; c < scheme.controls().size(); ++c)
            out = std::max(out, std::abs(dot_row(scheme.foot(m, c), psi) - psi[m]));
    return out;
}

}  // namespace

ValueGrid obstacle_solve(const SemiLagrangianScheme& scheme, const CostFn& cost, const ObstacleOptions& opts,
                         const ValueGrid* init) {
    if (std::abs(scheme.dt() - opts.dt) > 1e-15 * opts.dt)
        throw ContractViolation("obstacle_solve: scheme dt differs from options dt");
    if (!(opts.band_factor >= 0.0)) throw ConfigError("band_factor must be >= 0");
    const std::size_t nn = scheme.nodes();
    const std::size_t nc = scheme.controls().size();
    const std::size_t nk = scheme.claims();
    const auto range = cost_on_nodes(scheme.grid(), cost);
    std::vector<double> l(nn);
    for (std::size_t m = 0; m < nn; ++m) l[m] = std::exp(range.log_l[m]);

    ValueGrid out;
    out.grid = scheme.grid_ptr();
    out.kind = ValueGrid::Kind::Root;
    out.argmin.assign(nn, 0);
    out.log.dt = scheme.dt();
    out.log.tol = opts.tol;
    out.log.contraction = std::exp(-scheme.h() * scheme.dt());

    std::vector<double> cur(nn);
    if (init) {
        if (init->kind != ValueGrid::Kind::Root || init->values.size() != nn)
            throw ContractViolation("obstacle_solve: init must be a root grid on the same nodes");
        for (std::size_t m = 0; m < nn; ++m) cur[m] = std::max(l[m], init->values[m]);
    } else {
        cur = l;
    }
    std::vector<double> next(nn);

    const double disc = out.log.contraction;
    const bool jumps = scheme.lambda() > 0.0;
    double band = opts.band_factor * step_increment(scheme, cur);
    out.log.band = band;
    std::vector<double> jump_top(nc);

    double change = kInf;
    const std::size_t widen_at = opts.max_sweeps / 2;
    for (std::size_t sweep = 0; sweep < opts.max_sweeps; ++sweep) {
        if (sweep == widen_at && !out.log.converged) {
            band *= 2.0;
            out.log.band = band;
            out.log.band_widened = true;
        }
        change = 0.0;
        for (std::size_t m = 0; m < nn; ++m) {
            const double level = cur[m] + band;
            double best = kInf, fallback = kInf;
            std::uint32_t arg = 0, fallback_arg = 0;
            for (std::size_t c = 0; c < nc; ++c) {
                double transport = disc * dot_row(scheme.foot(m, c), cur);
                double top = -kInf;
                if (jumps)
                    for (std::size_t k = 0; k < nk; ++k)
                        if (scheme.claim_weights()[k] > 0.0)
                            top = std::max(top, dot_row(scheme.post_jump(m, c, k), cur));
                double v = std::max(transport, top);
                if (top <= level && v < best) {
                    best = v;
                    arg = static_cast<std::uint32_t>(c);
                }
                if (v < fallback) {
                    fallback = v;
                    fallback_arg = static_cast<std::uint32_t>(c);
                }
            }
            if (best == kInf) {
                best = fallback;
                arg = fallback_arg;
            }
            next[m] = std::max(l[m], best);
            out.argmin[m] = arg;
            change = std::max(change, std::abs(next[m] - cur[m]));
        }
        cur.swap(next);
        out.log.sup_change.push_back(change);
        out.log.sweeps = sweep + 1;
        if (change <= opts.tol) {
            out.log.converged = true;
            break;
        }
    }
    if (!out.log.converged) {
        std::ostringstream os;
        os << "obstacle iteration exceeded " << opts.max_sweeps << " sweeps (band " << band << "); last changes:";
        const auto& sc = out.log.sup_change;
        for (std::size_t k = sc.size() > 6 ? sc.size() - 6 : 0; k < sc.size(); ++k) os << ' ' << sc[k];
        throw NonConvergence(os.str(), change);
    }
    out.values = std::move(cur);
    return out;
}

CertificateReport dual_certificate_check(const ValueGrid& psi, const Dynamics& dyn,
                                         const std::vector<ControlPoint>& controls, double q, const CostFn& cost,
                                         std::span<const double> x0, double tol) {
    check_q(q);
    if (psi.kind != ValueGrid::Kind::Root) throw ContractViolation("dual_certificate_check expects a root grid");
    const auto& grid = *psi.grid;
    for (std::size_t m = 0; m < grid.size(); ++m)
        if (!(psi.values[m] > 0.0))
            throw PreconditionError("candidate is not positive at " + node_label(grid, m));

    const auto& law = dyn.claims();
    const double lambda = dyn.lambda();
    const double h = dyn.h();
    CertificateReport rep;
    rep.tolerance = tol;
    rep.violation = kInf;

    std::vector<double> x(grid.dim()), f(grid.dim()), g(grid.dim());
    std::vector<NodeWeight> rates;
    for (std::size_t m = 0; m < grid.size(); ++m) {
        grid.node(m, x);
        const double p = psi.values[m];
        const double log_p = std::log(p);
        const double l_term = std::exp(q * (std::log(cost(x)) - log_p)) * p / q;
        for (std::size_t c = 0; c < controls.size(); ++c) {
            dyn.drift(x, controls[c], f);
            grid.upwind(m, f, rates);
            double deriv = 0.0;
            for (const auto& r : rates) deriv += r.weight * (psi.values[r.node] - p);
            double jump_term = 0.0;
            if (lambda > 0.0) {
                for (std::size_t k = 0; k < law.size(); ++k) {
                    if (!(law.weights()[k] > 0.0)) continue;
                    dyn.jump(x, controls[c], law.support()[k], g);
                    for (std::size_t j = 0; j < g.size(); ++j) g[j] += x[j];
                    double post = psi.interp(g);
                    if (!(post > 0.0)) throw PreconditionError("candidate is not positive at a post-jump point");
                    jump_term += law.weights()[k] * std::exp(q * (std::log(post) - log_p));
                }
                jump_term *= lambda * p / q;
            }
            double rhs = -((1.0 + h * q + lambda) / q) * p + deriv + l_term + jump_term;
            ++rep.points_checked;
            if (rhs < rep.violation) {
                rep.violation = rhs;
                rep.worst_node = m;
                rep.worst_control = c;
            }
        }
    }
    rep.bound = psi.interp(x0);
    rep.passed = rep.violation >= -tol;
    return rep;
}

LimitProbeReport hamiltonian_limit_probe(const std::vector<double>& alpha,
                                         const std::vector<std::vector<double>>& beta,
                                         const std::vector<double>& claim_weights,
                                         const std::function<double(double, double)>& phi,
                                         const std::function<double(double)>& phi_inf, double nu, double mu,
                                         const std::vector<double>& q_list) {
    const std::size_t nc = alpha.size();
    if (nc == 0) throw ConfigError("limit probe: empty control set");
    if (beta.size() != nc) throw ConfigError("limit probe: beta needs one row per control");
    for (const auto& row : beta)
        if (row.size() != claim_weights.size()) throw ConfigError("limit probe: beta row has wrong length");
    if (!(nu > 0.0) || !(mu > 0.0)) throw ConfigError("limit probe: nu and mu must be > 0");

    double inf_phi1 = kInf;
    for (const auto& row : beta)
        for (std::size_t k = 0; k < row.size(); ++k)
            if (claim_weights[k] > 0.0) inf_phi1 = std::min(inf_phi1, phi(1.0, row[k]));
    if (!(inf_phi1 > 1.0))
        throw PreconditionError("limit probe: inf of phi_1 over the range of beta is " + std::to_string(inf_phi1) +
                                ", must exceed 1");

    LimitProbeReport rep;
    for (std::size_t c = 0; c < nc; ++c) {
        bool ok = true;
        for (std::size_t k = 0; k < claim_weights.size(); ++k)
            if (claim_weights[k] > 0.0 && phi_inf(beta[c][k]) > nu) ok = false;
        if (ok) {
            rep.admissible.push_back(c);
            rep.rhs = std::min(rep.rhs, alpha[c]);
        }
    }

    for (double q : q_list) {
        LimitProbeRow row;
        row.q = q;
        row.lhs = kInf;
        for (std::size_t c = 0; c < nc; ++c) {
            double log_norm = -kInf;  // log sum_k w_k (phi_q / nu)^q
            for (std::size_t k = 0; k < claim_weights.size(); ++k)
                if (claim_weights[k] > 0.0)
                    log_norm = log_add(log_norm, std::log(claim_weights[k]) +
                                                     q * (std::log(phi(q, beta[c][k])) - std::log(nu)));
            double v = alpha[c] + std::exp(std::log(mu / q) + log_norm);
            if (v < row.lhs) {
                row.lhs = v;
                row.argmin = c;
            }
        }
        row.gap = std::isinf(rep.rhs) ? kInf : std::abs(row.lhs - rep.rhs);
        rep.rows.push_back(row);
    }
    return rep;
}

void write_value_csv(const ValueGrid& v, std::ostream& os) {
    const auto& grid = *v.grid;
    for (std::size_t k = 0; k < grid.dim(); ++k) os << "x" << k << ',';
    os << (v.kind == ValueGrid::Kind::Power ? "log_W" : "V") << '\n';
    std::vector<double> x(grid.dim());
    os.precision(17);
    for (std::size_t m = 0; m < grid.size(); ++m) {
        grid.node(m, x);
        for (double c : x) os << c << ',';
        os << v.values[m] << '\n';
    }
}

}  // namespace runmax
