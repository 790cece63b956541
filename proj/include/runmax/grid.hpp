#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "runmax/model.hpp"

namespace runmax {

/// One coordinate discretized by an increasing node list; linear interpolation.
struct AxisBlock {
    std::size_t coord = 0;
    std::vector<double> nodes;
    /// Points further than this outside [nodes.front(), nodes.back()] are rejected;
    /// closer ones are clamped onto the box.
    double outside_tol = std::numeric_limits<double>::infinity();
};

/// A pair (s, i) restricted to the triangle s, i >= 0, s + i <= 1.
///
/// Uniform lattice with `side` nodes per side on [0, 1]; only lattice points
/// with a + b <= side - 1 exist. Each lattice square is split along its
/// anti-diagonal, and interpolation is barycentric on the resulting triangles,
/// so no value outside the triangle is ever needed.
struct SimplexBlock {
    std::size_t coord_s = 0;
    std::size_t coord_i = 0;
    std::size_t side = 3;
};

using GridBlock = std::variant<AxisBlock, SimplexBlock>;

/// (node, weight) pair; also used for (neighbour, rate) in upwind stencils.
struct NodeWeight {
    std::size_t node;
    double weight;
};

/**
 * Tensor product of axis and simplex blocks covering a flat state vector.
 *
 * Nodes are numbered in mixed radix over the blocks, first block slowest.
 * A zero-dimensional grid has exactly one node.
 */
class StateGrid {
public:
    StateGrid() : StateGrid(0, {}) {}
    StateGrid(std::size_t dim, std::vector<GridBlock> blocks);

    /// Plain rectangular grid, one axis per coordinate.
    static StateGrid rectangular(const std::vector<std::vector<double>>& axes);
    /// SIR layout: one simplex block per edge, one capital axis spanning the
    /// truncation box, post-jump points allowed up to `margin` outside.
    static StateGrid sir(std::size_t n, std::size_t si_side, std::size_t x_nodes, const Truncation& trunc);

    std::size_t dim() const { return dim_; }
    std::size_t size() const { return size_; }
    const std::vector<GridBlock>& blocks() const { return blocks_; }

    void node(std::size_t idx, std::span<double> out) const;
    std::vector<double> node(std::size_t idx) const;

    /// Interpolation weights of x (entries with zero weight dropped).
    /// Throws AssemblyError when x lies outside the box beyond tolerance.
    void interpolation(std::span<const double> x, std::vector<NodeWeight>& out) const;
    double interpolate(std::span<const double> values, std::span<const double> x) const;

    /// Upwind transition rates at node idx for velocity v: the one-sided
    /// directional derivative of any interpolant along v at the node equals
    /// sum rate * (value[neighbour] - value[idx]). Moves leaving the grid are dropped.
    void upwind(std::size_t idx, std::span<const double> v, std::vector<NodeWeight>& out) const;

    /// Coordinate box containing every point where the hat of node idx is nonzero
    /// (infinite on sides where points are clamped onto the grid).
    void support_box(std::size_t idx, std::span<double> lo, std::span<double> hi) const;
    /// Smallest node spacing over all blocks (inf for a zero-dimensional grid).
    double min_spacing() const;

    /// Human-readable geometry summary, e.g. "simplex(0,1;side=5) x axis(2;11)".
    std::string describe() const;

private:
    struct BlockInfo {
        std::size_t size = 1;
        std::size_t stride = 1;
        std::vector<std::size_t> row_offset;  // simplex only
    };

    std::size_t dim_;
    std::vector<GridBlock> blocks_;
    std::vector<BlockInfo> info_;
    std::size_t size_ = 1;

    std::size_t simplex_local(const BlockInfo& bi, std::size_t a, std::size_t b) const {
        return bi.row_offset[a] + b;
    }
    void simplex_decode(const SimplexBlock& sb, const BlockInfo& bi, std::size_t local, std::size_t& a,
                        std::size_t& b) const;
};

/// Geometric a-axis: {0} followed by a_min = ratio^{-(count-1)}, ..., 1.
std::vector<double> discount_axis(std::size_t count, double ratio);

}  // namespace runmax
