#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace runmax {

enum class RowSense { Equal, LessEqual };
enum class LpStatus { Optimal, Infeasible, IterationLimit };

std::string to_string(LpStatus s);

/// min c^T x  s.t.  A x (= or <=) b,  x >= 0, with A stored column-wise.
struct LinearProgram {
    std::size_t rows = 0;
    std::vector<std::size_t> col_start{0};
    std::vector<std::uint32_t> row_index;
    std::vector<double> value;
    std::vector<double> cost;
    std::vector<double> rhs;
    std::vector<RowSense> sense;

    std::size_t cols() const { return cost.size(); }
    /// Append a column; entries with equal row indices are summed.
    void add_column(double c, const std::vector<std::pair<std::uint32_t, double>>& entries);
    std::size_t add_row(double b, RowSense s);
};

struct SimplexOptions {
    double feas_tol = 1e-9;
    double opt_tol = 1e-9;
    std::size_t max_iters = 200000;
    /// Consecutive degenerate pivots before the basic values are perturbed.
    std::size_t stall_limit = 100;
};

struct SimplexResult {
    LpStatus status = LpStatus::IterationLimit;
    double objective = 0.0;
    std::vector<double> x;
    /// One multiplier per row: c_j - sum_i duals_i A_ij >= 0 at optimality.
    std::vector<double> duals;
    std::size_t iterations = 0;
    double primal_residual = 0.0;   // max |A x - b| over equality rows, positive part over <= rows
    double dual_violation = 0.0;    // max negative reduced cost
    double complementarity = 0.0;   // max x_j |reduced cost_j|
    /// Degeneracy was broken by perturbing basic values at some point.
    bool perturbed = false;
};

/// Two-phase revised primal simplex on an explicit dense basis inverse, with
/// equilibration, a Harris ratio test and perturbation against stalling.
SimplexResult solve_simplex(const LinearProgram& lp, const SimplexOptions& opts = {});

}  // namespace runmax
