#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "runmax/dynamics.hpp"
#include "runmax/grid.hpp"
#include "runmax/model.hpp"

namespace runmax {

struct OccupationMeta {
    std::size_t paths = 0;
    double horizon = 0.0;
    std::uint64_t seed = 0;
    /// Discounted time mass beyond the horizon, e^{-T}; removed by normalization.
    double tail_mass = 0.0;
    std::string quadrature;
    std::string warning;
};

/**
 * Discrete measure over (a, x, control) with total mass 1.
 *
 * Atoms are stored column-wise; x is flat with stride dim. Each atom keeps
 * the index of the path that produced it so Monte-Carlo errors can be
 * computed per path.
 */
struct OccupationMeasure {
    std::size_t dim = 0;
    std::vector<double> a;
    std::vector<double> x;
    std::vector<std::uint32_t> control;
    std::vector<std::uint32_t> path;
    std::vector<double> weight;
    std::vector<ControlPoint> controls;
    OccupationMeta meta;

    std::size_t size() const { return weight.size(); }
    std::span<const double> atom_x(std::size_t k) const { return {x.data() + k * dim, dim}; }
    void push(double a_value, std::span<const double> xs, std::uint32_t ctrl, std::uint32_t path_id, double w);

    double total_mass() const;
    /// Scale weights to sum to one (compensated summation).
    void normalize();
    /// Integral of fn(a, x) against the measure.
    double integrate(const std::function<double(double, std::span<const double>)>& fn) const;
};

/// Test function on (a, x): value and one-sided directional derivative along (va, vx).
struct TestFunction {
    std::string name;
    std::function<double(double, std::span<const double>)> value;
    std::function<double(double, std::span<const double>, double, std::span<const double>)> directional;

    static TestFunction constant(double c);
    /// a^k, independent of x.
    static TestFunction a_power(double k);
    /// Interpolation hat of `node` on a grid whose coordinate 0 is a^a_exponent
    /// and coordinates 1.. are x. The directional derivative is a one-sided
    /// difference over a sub-cell step, exact for piecewise-linear functions.
    static TestFunction hat(std::shared_ptr<const StateGrid> grid, std::size_t node, double a_exponent = 1.0);
    /// Smooth bump (1 - |z|^2)^3 with z = (x - center) / radius, times a^k.
    static TestFunction bump(std::vector<double> center, double radius, double a_exponent = 0.0);
};

struct GeneratorResidual {
    std::string name;
    double residual = 0.0;
    /// Standard error of the residual across paths (0 for single-path measures).
    double std_error = 0.0;
};

/**
 * Evaluates phi(a0, x0) + int [ -phi + <(-h a, f), grad phi> + lambda sum_k w_k (phi(a, x + g_k) - phi) ] d gamma
 * for every test function. The jump integral is an exact sum over the claim law.
 */
std::vector<GeneratorResidual> generator_residuals(const OccupationMeasure& occ, const Dynamics& dyn,
                                                   std::span<const double> x0, double a0,
                                                   const std::vector<TestFunction>& tests);

/// Grid over (a, x) built by prepending an a-axis to a state grid.
StateGrid with_discount_axis(const StateGrid& grid, const std::vector<double>& a_nodes);

}  // namespace runmax
