#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "runmax/cost.hpp"
#include "runmax/dynamics.hpp"
#include "runmax/grid.hpp"
#include "runmax/occupation.hpp"
#include "runmax/simplex.hpp"

namespace runmax {

/**
 * Occupation-measure LP for V_q^q on a grid over (a, x).
 *
 * One variable per (a-node, x-node, control). Equality rows test the
 * generator identity against every interpolation hat, plus the mass row;
 * one inequality row bounds the fourth moment. The a-axis is interpolated
 * linearly in z = a^q, which makes the discrete discount transport exact
 * on a^q; costs are a^q L^q / (sup L)^q.
 */
struct LpProblem {
    LinearProgram lp;
    StateGrid xgrid;
    /// Grid over (z, x) with z = a^q; hat rows are numbered by its nodes.
    StateGrid zgrid;
    std::vector<double> a_nodes;
    std::vector<ControlPoint> controls;
    std::vector<double> x0;
    double q = 2.0;
    double h = 1.0;
    /// Objective and duals are in units of (sup L)^q.
    double cost_scale = 1.0;
    double moment_limit = 0.0;

    std::size_t hat_rows = 0;
    std::size_t mass_row = 0;
    std::size_t moment_row = 0;

    std::vector<std::uint32_t> col_a;
    std::vector<std::uint32_t> col_node;
    std::vector<std::uint32_t> col_control;
};

struct LpBuildOptions {
    /// The a = 0 layer carries no cost; one control there leaves the optimum unchanged.
    bool single_control_at_zero = true;
};

/// Geometric a-nodes {0, ratio^{-(count-1)}, ..., 1}; any count >= 1 is exact on a^q.
LpProblem build_lp(const Dynamics& dyn, const StateGrid& grid, const std::vector<double>& a_nodes,
                   const std::vector<ControlPoint>& controls, double q, std::span<const double> x0,
                   const CostFn& cost, const LpBuildOptions& opts = {});

struct LpSolution {
    LpStatus status = LpStatus::IterationLimit;
    /// Optimal value of int a^q L^q d gamma (unscaled).
    double primal_value = 0.0;
    /// primal_value^{1/q}, computed without leaving the scaled range.
    double value_q = 0.0;
    OccupationMeasure measure;
    /// Row multipliers in scaled units (multiply by cost_scale for the unscaled problem).
    std::vector<double> duals;
    SimplexResult simplex;
};

LpSolution solve_lp(const LpProblem& prob, const SimplexOptions& opts = {});

/// V_q(x0) via the LP; throws NonConvergence unless the solve is optimal.
double lp_value_q(const Dynamics& dyn, const StateGrid& grid, const std::vector<double>& a_nodes,
                  const std::vector<ControlPoint>& controls, double q, std::span<const double> x0,
                  const CostFn& cost, LpSolution* solution = nullptr);

/// Test function on the (z, x) grid rebuilt from the equality-row multipliers.
struct DualReconstruction {
    /// psi per (a-node, x-node), unscaled, numbered like the hat rows.
    std::vector<double> psi;
    /// Largest violation of psi - L psi + mu |x|^4 <= a^q L^q over all columns (unscaled, >= 0).
    double max_violation = 0.0;
    /// psi(1, x0), the interpolated value at the initial point.
    double psi_x0 = 0.0;
    /// psi(1, x0) plus the moment-row term: a lower bound on the primal value.
    double certified_bound = 0.0;
    double moment_multiplier = 0.0;
    /// Reported, not asserted: min over a = 1 nodes of psi.
    double min_psi_top = 0.0;
};

DualReconstruction dual_as_test_function(const LpSolution& sol, const LpProblem& prob);

/// Plain-text dump: header, one "row" line per row, one "col" line per column.
void export_lp(const LpProblem& prob, std::ostream& os);

}  // namespace runmax
