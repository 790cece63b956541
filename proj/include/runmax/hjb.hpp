#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "runmax/cost.hpp"
#include "runmax/dynamics.hpp"
#include "runmax/grid.hpp"

namespace runmax {

/// Sweep-by-sweep record of a fixed-point iteration.
struct SolveLog {
    std::vector<double> sup_change;
    std::size_t sweeps = 0;
    double dt = 0.0;
    double tol = 0.0;
    /// Exact Lipschitz factor of one sweep in the sup norm.
    double contraction = 1.0;
    bool converged = false;
    /// Obstacle solver only.
    double band = 0.0;
    bool band_widened = false;
};

/**
 * Node values on a state grid (no a-axis; the discount is folded into the scheme).
 *
 * A Power grid holds log W with W = V_q^q (W itself overflows for large q).
 * A Root grid holds plain values: V_q, or the running-max value when q is infinite.
 */
struct ValueGrid {
    enum class Kind { Power, Root };

    std::shared_ptr<const StateGrid> grid;
    std::vector<double> values;
    double q = std::numeric_limits<double>::infinity();
    Kind kind = Kind::Root;
    /// Minimizing control index per node (lowest index on ties); empty if not recorded.
    std::vector<std::uint32_t> argmin;
    SolveLog log;

    /// log W (Power) or log V (Root) at a node.
    double log_at(std::size_t node) const;
    /// Interpolated value of a Root grid.
    double interp(std::span<const double> x) const;
};

/**
 * Precomputed interpolation stencils for every (node, control): the foot
 * point x + dt f and each post-jump point x + g(y_k). Independent of q, so one
 * instance serves a whole q sweep and the obstacle solver.
 */
class SemiLagrangianScheme {
public:
    SemiLagrangianScheme(const Dynamics& dyn, std::shared_ptr<const StateGrid> grid,
                         std::vector<ControlPoint> controls, double dt);

    const StateGrid& grid() const { return *grid_; }
    std::shared_ptr<const StateGrid> grid_ptr() const { return grid_; }
    const std::vector<ControlPoint>& controls() const { return controls_; }
    std::size_t nodes() const { return grid_->size(); }
    double dt() const { return dt_; }
    double h() const { return h_; }
    double lambda() const { return lambda_; }
    std::size_t claims() const { return claim_weights_.size(); }
    const std::vector<double>& claim_weights() const { return claim_weights_; }

    std::span<const NodeWeight> foot(std::size_t node, std::size_t control) const;
    std::span<const NodeWeight> post_jump(std::size_t node, std::size_t control, std::size_t claim) const;

private:
    struct Csr {
        std::vector<std::size_t> start{0};
        std::vector<NodeWeight> entries;
        std::span<const NodeWeight> row(std::size_t r) const {
            return {entries.data() + start[r], start[r + 1] - start[r]};
        }
    };

    std::shared_ptr<const StateGrid> grid_;
    std::vector<ControlPoint> controls_;
    double dt_;
    double h_;
    double lambda_;
    std::vector<double> claim_weights_;
    Csr foot_;
    Csr jump_;
};

struct HjbOptions {
    double dt = 1e-2;
    double tol = 1e-9;
    std::size_t max_sweeps = 200000;
};

/**
 * W = V_q^q by value iteration from W = 0:
 *
 *   W(x) <- min_u [ A L^q(x) + D ((1 - lambda dt) V(foot)^q + lambda dt sum_k w_k V(x + g_k)^q) ],
 *
 * with V = W^{1/q} interpolated linearly, D = exp(-(1 + qh) dt) and
 * A = (1 - D) / (1 + qh). All q-th powers are taken in log space. One sweep
 * contracts V in the sup norm by D^{1/q}; iteration stops when the sup-norm
 * change of V drops to tol.
 */
ValueGrid value_iteration_q(const SemiLagrangianScheme& scheme, double q, const CostFn& cost,
                            const HjbOptions& opts = {});
ValueGrid value_iteration_q(const Dynamics& dyn, std::shared_ptr<const StateGrid> grid,
                            const std::vector<ControlPoint>& controls, double q, const CostFn& cost,
                            const HjbOptions& opts = {});

/// One application of the scheme operator, written on V = W^{1/q}.
std::vector<double> apply_operator(const SemiLagrangianScheme& scheme, double q, const CostFn& cost,
                                   std::span<const double> v);

/// V_q = W^{1/q}, node by node.
ValueGrid vq_root(const ValueGrid& w);

/// Root grid with every value shifted by delta.
ValueGrid shifted(const ValueGrid& v, double delta);

struct SweepReport {
    std::vector<double> q_list;
    /// Root grids, one per q.
    std::vector<ValueGrid> roots;
    /// sup_x (V_{q_k} - V_{q_{k-1}}), k >= 1.
    std::vector<double> sup_increment;
    /// Nodes whose last increment still exceeds stabilization_tol relative to the value.
    std::vector<std::size_t> unstable_nodes;
    double stabilization_tol = 1e-2;
};

std::vector<double> default_q_list();
/// 2, 4, ..., 2048: the schedule that actually approaches the running-max value.
std::vector<double> extended_q_list();

/// V_q for each q; throws ConsistencyError when some node decreases by more than mono_tol.
SweepReport q_sweep(const SemiLagrangianScheme& scheme, const CostFn& cost, const std::vector<double>& q_list,
                    const HjbOptions& opts = {}, double mono_tol = 1e-6);

/// Controls (by index) with max_k psi(x + g(x, u, y_k)) <= r at the given node.
std::vector<std::size_t> constrained_controls(const ValueGrid& psi, std::size_t node, double r,
                                              const Dynamics& dyn, const std::vector<ControlPoint>& controls);

struct HamiltonianValue {
    /// +inf when no control is admissible.
    double value = std::numeric_limits<double>::infinity();
    std::optional<std::size_t> control;
};

/// min over the constrained set of <p, f(x, u)>.
HamiltonianValue constrained_hamiltonian(const ValueGrid& psi, std::size_t node, double r,
                                         std::span<const double> p, const Dynamics& dyn,
                                         const std::vector<ControlPoint>& controls);

struct ObstacleOptions {
    double dt = 1e-2;
    double tol = 1e-9;
    std::size_t max_sweeps = 100000;
    /// Constraint band in units of the largest one-step change |psi(foot) - psi(x)| of the initial iterate.
    double band_factor = 1.0;
};

/**
 * Running-max value V = inf_u ess sup_t e^{-ht} L(X_t) by the iteration
 *
 *   psi(x) <- max{ L(x), min_{u in U} max( e^{-h dt} psi(foot_u), max_k psi(x + g_k(u)) ) },
 *
 * U = {u : max_k psi(x + g_k(u)) <= psi(x) + band}, or every control when that
 * set is empty. Starts from init, or from L. The band is doubled once if the
 * first half of the sweep budget does not converge.
 */
ValueGrid obstacle_solve(const SemiLagrangianScheme& scheme, const CostFn& cost, const ObstacleOptions& opts = {},
                         const ValueGrid* init = nullptr);

struct CertificateReport {
    /// Most negative right-hand side over (node, control); >= -tolerance certifies.
    double violation = 0.0;
    double bound = 0.0;
    double tolerance = 1e-6;
    std::size_t points_checked = 0;
    std::size_t worst_node = 0;
    std::size_t worst_control = 0;
    bool passed = false;
};

/**
 * Evaluates, at every grid node and control,
 *
 *   -((1 + hq + lambda)/q) psi + <f, grad psi> + (1/q)(L/psi)^q psi
 *       + (lambda/q) sum_k w_k (psi(x + g_k)/psi)^q psi,
 *
 * with the one-sided derivative of the interpolant along f. A nonnegative
 * minimum makes psi(x0) a lower bound for V_q(x0).
 */
CertificateReport dual_certificate_check(const ValueGrid& psi, const Dynamics& dyn,
                                         const std::vector<ControlPoint>& controls, double q, const CostFn& cost,
                                         std::span<const double> x0, double tol = 1e-6);

struct LimitProbeRow {
    double q = 0.0;
    double lhs = 0.0;
    double gap = 0.0;
    std::size_t argmin = 0;
};

struct LimitProbeReport {
    std::vector<LimitProbeRow> rows;
    /// inf of alpha over controls with phi_inf(beta) <= nu on the claim support; +inf if none.
    double rhs = std::numeric_limits<double>::infinity();
    std::vector<std::size_t> admissible;
};

/**
 * min_u [alpha(u) + (1/q)(||phi_q(beta(u, .))||_q / nu)^q mu] for each q, against
 * its limit. beta is indexed [control][claim]; phi(q, r) is the family.
 */
LimitProbeReport hamiltonian_limit_probe(const std::vector<double>& alpha,
                                         const std::vector<std::vector<double>>& beta,
                                         const std::vector<double>& claim_weights,
                                         const std::function<double(double, double)>& phi,
                                         const std::function<double(double)>& phi_inf, double nu, double mu,
                                         const std::vector<double>& q_list);

/// "x0,...,x{d-1},value" rows, one per node; Power grids are written as log W.
void write_value_csv(const ValueGrid& v, std::ostream& os);

}  // namespace runmax
