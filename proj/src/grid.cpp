#include "runmax/grid.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>

#include "runmax/errors.hpp"

namespace runmax {

namespace {

constexpr double kTriangleTol = 1e-6;

// Lattice directions around a simplex node, in counter-clockwise order.
// Consecutive pairs span exactly the six triangles touching the node.
constexpr std::array<std::array<int, 2>, 6> kHex = {
    {{1, 0}, {0, 1}, {-1, 1}, {-1, 0}, {0, -1}, {1, -1}}};

std::string coord_msg(std::size_t coord, double value) {
    std::ostringstream os;
    os << "point outside grid box on coordinate " << coord << " (value " << value << ")";
    return os.str();
}

}  // namespace

StateGrid::StateGrid(std::size_t dim, std::vector<GridBlock> blocks) : dim_(dim), blocks_(std::move(blocks)) {
    std::vector<int> covered(dim_, 0);
    auto cover = [&](std::size_t c) {
        if (c >= dim_) throw ConfigError("grid block refers to coordinate " + std::to_string(c) + " >= dim");
        ++covered[c];
    };
    info_.resize(blocks_.size());
    for (std::size_t k = 0; k < blocks_.size(); ++k) {
        BlockInfo& bi = info_[k];
        if (const auto* ab = std::get_if<AxisBlock>(&blocks_[k])) {
            cover(ab->coord);
            if (ab->nodes.empty()) throw ConfigError("grid axis " + std::to_string(ab->coord) + " has no nodes");
            for (std::size_t j = 1; j < ab->nodes.size(); ++j)
                if (!(ab->nodes[j] > ab->nodes[j - 1]))
                    throw ConfigError("grid axis " + std::to_string(ab->coord) + " is not strictly increasing");
            bi.size = ab->nodes.size();
        } else {
            const auto& sb = std::get<SimplexBlock>(blocks_[k]);
            cover(sb.coord_s);
            cover(sb.coord_i);
            if (sb.side < 2) throw ConfigError("simplex block needs at least 2 nodes per side");
            bi.row_offset.resize(sb.side + 1);
            std::size_t acc = 0;
            for (std::size_t a = 0; a <= sb.side; ++a) {
                bi.row_offset[a] = acc;
                if (a < sb.side) acc += sb.side - a;
            }
            bi.size = acc;
        }
    }
    for (std::size_t c = 0; c < dim_; ++c)
        if (covered[c] != 1)
            throw ConfigError("grid coordinate " + std::to_string(c) + " must be covered by exactly one block");
    size_ = 1;
    for (std::size_t k = blocks_.size(); k-- > 0;) {
        info_[k].stride = size_;
        size_ *= info_[k].size;
    }
}

StateGrid StateGrid::rectangular(const std::vector<std::vector<double>>& axes) {
    std::vector<GridBlock> blocks;
    for (std::size_t c = 0; c < axes.size(); ++c) blocks.emplace_back(AxisBlock{c, axes[c]});
    return StateGrid(axes.size(), std::move(blocks));
}

StateGrid StateGrid::sir(std::size_t n, std::size_t si_side, std::size_t x_nodes, const Truncation& trunc) {
    if (x_nodes < 2) throw ConfigError("capital axis needs at least 2 nodes");
    std::vector<GridBlock> blocks;
    for (std::size_t j = 0; j < n; ++j) blocks.emplace_back(SimplexBlock{j, n + j, si_side});
    AxisBlock xb;
    xb.coord = 2 * n;
    xb.outside_tol = trunc.margin;
    xb.nodes.resize(x_nodes);
    for (std::size_t k = 0; k < x_nodes; ++k)
        xb.nodes[k] = trunc.box_lo() + (trunc.box_hi() - trunc.box_lo()) * static_cast<double>(k) /
                                          static_cast<double>(x_nodes - 1);
    blocks.emplace_back(std::move(xb));
    return StateGrid(2 * n + 1, std::move(blocks));
}

void StateGrid::simplex_decode(const SimplexBlock& sb, const BlockInfo& bi, std::size_t local, std::size_t& a,
                               std::size_t& b) const {
    auto it = std::upper_bound(bi.row_offset.begin(), bi.row_offset.begin() + static_cast<std::ptrdiff_t>(sb.side),
                               local);
    a = static_cast<std::size_t>(it - bi.row_offset.begin()) - 1;
    b = local - bi.row_offset[a];
}

void StateGrid::node(std::size_t idx, std::span<double> out) const {
    if (idx >= size_) throw ContractViolation("grid node index out of range");
    if (out.size() != dim_) throw ContractViolation("grid node output has wrong dimension");
    for (std::size_t k = 0; k < blocks_.size(); ++k) {
        std::size_t local = (idx / info_[k].stride) % info_[k].size;
        if (const auto* ab = std::get_if<AxisBlock>(&blocks_[k])) {
            out[ab->coord] = ab->nodes[local];
        } else {
            const auto& sb = std::get<SimplexBlock>(blocks_[k]);
            std::size_t a = 0, b = 0;
            simplex_decode(sb, info_[k], local, a, b);
            double d = 1.0 / static_cast<double>(sb.side - 1);
            out[sb.coord_s] = static_cast<double>(a) * d;
            out[sb.coord_i] = static_cast<double>(b) * d;
        }
    }
}

std::vector<double> StateGrid::node(std::size_t idx) const {
    std::vector<double> out(dim_);
    node(idx, out);
    return out;
}

void StateGrid::interpolation(std::span<const double> x, std::vector<NodeWeight>& out) const {
    if (x.size() != dim_) throw ContractViolation("grid interpolation: point has wrong dimension");
    out.clear();
    out.push_back({0, 1.0});
    std::array<NodeWeight, 3> local{};
    std::vector<NodeWeight> next;
    for (std::size_t k = 0; k < blocks_.size(); ++k) {
        const BlockInfo& bi = info_[k];
        std::size_t count = 0;
        if (const auto* ab = std::get_if<AxisBlock>(&blocks_[k])) {
            double v = x[ab->coord];
            const auto& nd = ab->nodes;
            if (!std::isfinite(v) || v < nd.front() - ab->outside_tol || v > nd.back() + ab->outside_tol)
                throw AssemblyError(coord_msg(ab->coord, v));
            if (nd.size() == 1 || v <= nd.front()) {
                local[count++] = {0, 1.0};
            } else if (v >= nd.back()) {
                local[count++] = {nd.size() - 1, 1.0};
            } else {
                auto it = std::upper_bound(nd.begin(), nd.end(), v);
                std::size_t j = static_cast<std::size_t>(it - nd.begin()) - 1;
                double f = (v - nd[j]) / (nd[j + 1] - nd[j]);
                local[count++] = {j, 1.0 - f};
                local[count++] = {j + 1, f};
            }
        } else {
            const auto& sb = std::get<SimplexBlock>(blocks_[k]);
            double s = x[sb.coord_s];
            double i = x[sb.coord_i];
            if (!std::isfinite(s) || s < -kTriangleTol) throw AssemblyError(coord_msg(sb.coord_s, s));
            if (!std::isfinite(i) || i < -kTriangleTol) throw AssemblyError(coord_msg(sb.coord_i, i));
            if (s + i > 1.0 + kTriangleTol) throw AssemblyError(coord_msg(sb.coord_s, s + i));
            s = std::max(s, 0.0);
            i = std::max(i, 0.0);
            if (s + i > 1.0) {
                double t = s + i;
                s /= t;
                i /= t;
            }
            const std::size_t top = sb.side - 1;
            double ar = s * static_cast<double>(top);
            double br = i * static_cast<double>(top);
            std::size_t ka = std::min(static_cast<std::size_t>(ar), top - 1);
            std::size_t kb = std::min(static_cast<std::size_t>(br), top - 1);
            while (ka + kb > top - 1) {
                if (ka >= kb) --ka;
                else --kb;
            }
            double fa = ar - static_cast<double>(ka);
            double fb = br - static_cast<double>(kb);
            if (ka + kb == top - 1 && fa + fb > 1.0) {
                double t = fa + fb;
                fa /= t;
                fb /= t;
            }
            if (fa + fb <= 1.0) {
                local[count++] = {simplex_local(bi, ka, kb), std::max(1.0 - fa - fb, 0.0)};
                local[count++] = {simplex_local(bi, ka + 1, kb), fa};
                local[count++] = {simplex_local(bi, ka, kb + 1), fb};
            } else {
                local[count++] = {simplex_local(bi, ka + 1, kb + 1), std::max(fa + fb - 1.0, 0.0)};
                local[count++] = {simplex_local(bi, ka + 1, kb), std::max(1.0 - fb, 0.0)};
                local[count++] = {simplex_local(bi, ka, kb + 1), std::max(1.0 - fa, 0.0)};
            }
        }
        next.clear();
        for (const auto& e : out)
            for (std::size_t c = 0; c < count; ++c)
                if (local[c].weight != 0.0)
                    next.push_back({e.node + local[c].node * bi.stride, e.weight * local[c].weight});
        out.swap(next);
    }
}

double StateGrid::interpolate(std::span<const double> values, std::span<const double> x) const {
    if (values.size() != size_) throw ContractViolation("grid interpolate: value count does not match grid");
    thread_local std::vector<NodeWeight> st;
    interpolation(x, st);
    double acc = 0.0;
    for (const auto& e : st) acc += e.weight * values[e.node];
    return acc;
}

void StateGrid::upwind(std::size_t idx, std::span<const double> v, std::vector<NodeWeight>& out) const {
    if (v.size() != dim_) throw ContractViolation("grid upwind: velocity has wrong dimension");
    out.clear();
    for (std::size_t k = 0; k < blocks_.size(); ++k) {
        const BlockInfo& bi = info_[k];
        std::size_t local = (idx / bi.stride) % bi.size;
        std::size_t base = idx - local * bi.stride;
        if (const auto* ab = std::get_if<AxisBlock>(&blocks_[k])) {
            double c = v[ab->coord];
            const auto& nd = ab->nodes;
            if (c > 0.0 && local + 1 < nd.size())
                out.push_back({base + (local + 1) * bi.stride, c / (nd[local + 1] - nd[local])});
            else if (c < 0.0 && local > 0)
                out.push_back({base + (local - 1) * bi.stride, -c / (nd[local] - nd[local - 1])});
        } else {
            const auto& sb = std::get<SimplexBlock>(blocks_[k]);
            double scale = static_cast<double>(sb.side - 1);
            double wa = v[sb.coord_s] * scale;
            double wb = v[sb.coord_i] * scale;
            if (wa == 0.0 && wb == 0.0) continue;
            std::size_t a = 0, b = 0;
            simplex_decode(sb, bi, local, a, b);
            for (std::size_t d = 0; d < 6; ++d) {
                const auto& e1 = kHex[d];
                const auto& e2 = kHex[(d + 1) % 6];
                double alpha = wa * e2[1] - wb * e2[0];
                double beta = e1[0] * wb - e1[1] * wa;
                if (alpha < 0.0 || beta < 0.0) continue;
                auto push = [&](const std::array<int, 2>& e, double rate) {
                    if (rate <= 0.0) return;
                    long na = static_cast<long>(a) + e[0];
                    long nb = static_cast<long>(b) + e[1];
                    if (na < 0 || nb < 0 || na + nb > static_cast<long>(sb.side - 1)) return;
                    std::size_t nl = simplex_local(bi, static_cast<std::size_t>(na), static_cast<std::size_t>(nb));
                    out.push_back({base + nl * bi.stride, rate});
                };
                push(e1, alpha);
                push(e2, beta);
                break;
            }
        }
    }
}

void StateGrid::support_box(std::size_t idx, std::span<double> lo, std::span<double> hi) const {
    constexpr double kInf = std::numeric_limits<double>::infinity();
    if (lo.size() != dim_ || hi.size() != dim_) throw ContractViolation("support_box: output has wrong dimension");
    std::vector<double> x = node(idx);
    for (const auto& blk : blocks_) {
        if (const auto* ab = std::get_if<AxisBlock>(&blk)) {
            const auto& nd = ab->nodes;
            auto j = static_cast<std::size_t>(std::lower_bound(nd.begin(), nd.end(), x[ab->coord]) - nd.begin());
            lo[ab->coord] = j > 0 ? nd[j - 1] : -kInf;
            hi[ab->coord] = j + 1 < nd.size() ? nd[j + 1] : kInf;
        } else {
            const auto& sb = std::get<SimplexBlock>(blk);
            double d = 1.0 / static_cast<double>(sb.side - 1) + kTriangleTol;
            lo[sb.coord_s] = x[sb.coord_s] - d;
            hi[sb.coord_s] = x[sb.coord_s] + d;
            lo[sb.coord_i] = x[sb.coord_i] - d;
            hi[sb.coord_i] = x[sb.coord_i] + d;
        }
    }
}

double StateGrid::min_spacing() const {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& blk : blocks_) {
        if (const auto* ab = std::get_if<AxisBlock>(&blk)) {
            for (std::size_t j = 1; j < ab->nodes.size(); ++j) m = std::min(m, ab->nodes[j] - ab->nodes[j - 1]);
        } else {
            m = std::min(m, 1.0 / static_cast<double>(std::get<SimplexBlock>(blk).side - 1));
        }
    }
    return m;
}

std::string StateGrid::describe() const {
    std::ostringstream os;
    if (blocks_.empty()) return "point";
    for (std::size_t k = 0; k < blocks_.size(); ++k) {
        if (k) os << " x ";
        if (const auto* ab = std::get_if<AxisBlock>(&blocks_[k])) {
            os << "axis(" << ab->coord << ";" << ab->nodes.size() << " nodes on [" << ab->nodes.front() << ","
               << ab->nodes.back() << "])";
        } else {
            const auto& sb = std::get<SimplexBlock>(blocks_[k]);
            os << "simplex(" << sb.coord_s << "," << sb.coord_i << ";side=" << sb.side << ")";
        }
    }
    return os.str();
}

std::vector<double> discount_axis(std::size_t count, double ratio) {
    if (count == 0) throw ConfigError("discount axis needs at least one positive node");
    if (!(ratio > 1.0)) throw ConfigError("discount axis ratio must be > 1");
    std::vector<double> a{0.0};
    for (std::size_t j = 0; j < count; ++j)
        a.push_back(std::pow(ratio, -static_cast<double>(count - 1 - j)));
    return a;
}

}  // namespace runmax
