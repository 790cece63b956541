#include "runmax/occupation.hpp"

#include <algorithm>
#include <cmath>

#include "runmax/errors.hpp"

namespace runmax {

namespace {

// Kahan-Babuska (Neumaier) summation.
struct CompensatedSum {
    double sum = 0.0;
    double carry = 0.0;
    void add(double v) {
        double t = sum + v;
        if (std::abs(sum) >= std::abs(v)) carry += (sum - t) + v;
        else carry += (v - t) + sum;
        sum = t;
    }
    double value() const { return sum + carry; }
};

}  // namespace

void OccupationMeasure::push(double a_value, std::span<const double> xs, std::uint32_t ctrl, std::uint32_t path_id,
                             double w) {
    if (xs.size() != dim) throw ContractViolation("occupation atom has wrong dimension");
    a.push_back(a_value);
    x.insert(x.end(), xs.begin(), xs.end());
    control.push_back(ctrl);
    path.push_back(path_id);
    weight.push_back(w);
}

double OccupationMeasure::total_mass() const {
    CompensatedSum s;
    for (double w : weight) s.add(w);
    return s.value();
}

void OccupationMeasure::normalize() {
    double m = total_mass();
    if (!(m > 0.0)) throw ContractViolation("occupation measure has no mass");
    for (double& w : weight) w /= m;
}

double OccupationMeasure::integrate(const std::function<double(double, std::span<const double>)>& fn) const {
    CompensatedSum s;
    for (std::size_t k = 0; k < size(); ++k) s.add(weight[k] * fn(a[k], atom_x(k)));
    return s.value();
}

TestFunction TestFunction::constant(double c) {
    return {"const", [c](double, std::span<const double>) { return c; },
            [](double, std::span<const double>, double, std::span<const double>) { return 0.0; }};
}

TestFunction TestFunction::a_power(double k) {
    return {"a^" + std::to_string(k), [k](double a, std::span<const double>) { return std::pow(a, k); },
            [k](double a, std::span<const double>, double va, std::span<const double>) {
                return k == 0.0 ? 0.0 : k * std::pow(a, k - 1.0) * va;
            }};
}

TestFunction TestFunction::hat(std::shared_ptr<const StateGrid> grid, std::size_t node, double a_exponent) {
    if (node >= grid->size()) throw ContractViolation("hat test function: node out of range");
    const double step = 1e-6 * std::min(1.0, grid->min_spacing());
    // Most atoms miss the support; the box test skips the interpolation for them.
    auto lo = std::make_shared<std::vector<double>>(grid->dim());
    auto hi = std::make_shared<std::vector<double>>(grid->dim());
    grid->support_box(node, *lo, *hi);
    auto outside = [lo, hi](double z, std::span<const double> x, double pad) {
        if (z < (*lo)[0] - pad || z > (*hi)[0] + pad) return true;
        for (std::size_t k = 0; k < x.size(); ++k)
            if (x[k] < (*lo)[k + 1] - pad || x[k] > (*hi)[k + 1] + pad) return true;
        return false;
    };
    auto eval = [grid, node, a_exponent, outside](double a, std::span<const double> x) {
        thread_local std::vector<double> p;
        thread_local std::vector<NodeWeight> st;
        double z = a_exponent == 1.0 ? a : std::pow(a, a_exponent);
        if (outside(z, x, 0.0)) return 0.0;
        p.resize(x.size() + 1);
        p[0] = z;
        std::copy(x.begin(), x.end(), p.begin() + 1);
        grid->interpolation(p, st);
        for (const auto& e : st)
            if (e.node == node) return e.weight;
        return 0.0;
    };
    auto dir = [grid, node, a_exponent, step, outside](double a, std::span<const double> x, double va,
                                                       std::span<const double> vx) {
        thread_local std::vector<double> p, q;
        thread_local std::vector<NodeWeight> st;
        double z = a_exponent == 1.0 ? a : std::pow(a, a_exponent);
        // The difference step moves each coordinate by at most `step`.
        if (outside(z, x, 2.0 * step)) return 0.0;
        p.resize(x.size() + 1);
        q.resize(x.size() + 1);
        double vz = a_exponent == 1.0 ? va : (a > 0.0 ? a_exponent * z / a * va : 0.0);
        double norm = std::abs(vz);
        for (double v : vx) norm = std::max(norm, std::abs(v));
        if (norm == 0.0) return 0.0;
        double d = step / norm;
        p[0] = z;
        q[0] = z + d * vz;
        for (std::size_t k = 0; k < x.size(); ++k) {
            p[k + 1] = x[k];
            q[k + 1] = x[k] + d * vx[k];
        }
        auto weight_at = [&](const std::vector<double>& pt) {
            grid->interpolation(pt, st);
            for (const auto& e : st)
                if (e.node == node) return e.weight;
            return 0.0;
        };
        return (weight_at(q) - weight_at(p)) / d;
    };
    return {"hat#" + std::to_string(node), eval, dir};
}

TestFunction TestFunction::bump(std::vector<double> center, double radius, double a_exponent) {
    if (!(radius > 0.0)) throw ContractViolation("bump test function: radius must be > 0");
    auto shape = [center, radius](std::span<const double> x, double& value, std::vector<double>* grad) {
        double r2 = 0.0;
        for (std::size_t k = 0; k < x.size(); ++k) {
            double z = (x[k] - center[k]) / radius;
            r2 += z * z;
        }
        if (r2 >= 1.0) {
            value = 0.0;
            if (grad) grad->assign(x.size(), 0.0);
            return;
        }
        double t = 1.0 - r2;
        value = t * t * t;
        if (grad) {
            grad->resize(x.size());
            for (std::size_t k = 0; k < x.size(); ++k)
                (*grad)[k] = -6.0 * t * t * (x[k] - center[k]) / (radius * radius);
        }
    };
    auto eval = [shape, a_exponent, center](double a, std::span<const double> x) {
        if (x.size() != center.size()) throw ContractViolation("bump test function: dimension mismatch");
        double v = 0.0;
        shape(x, v, nullptr);
        return std::pow(a, a_exponent) * v;
    };
    auto dir = [shape, a_exponent](double a, std::span<const double> x, double va, std::span<const double> vx) {
        thread_local std::vector<double> grad;
        double v = 0.0;
        shape(x, v, &grad);
        double ak = std::pow(a, a_exponent);
        double dak = a_exponent == 0.0 ? 0.0 : a_exponent * std::pow(a, a_exponent - 1.0);
        double acc = dak * va * v;
        for (std::size_t k = 0; k < x.size(); ++k) acc += ak * grad[k] * vx[k];
        return acc;
    };
    return {"bump", eval, dir};
}

std::vector<GeneratorResidual> generator_residuals(const OccupationMeasure& occ, const Dynamics& dyn,
                                                   std::span<const double> x0, double a0,
                                                   const std::vector<TestFunction>& tests) {
    if (occ.size() == 0) throw ContractViolation("generator residuals: empty measure");
    if (occ.dim != dyn.dim() || x0.size() != dyn.dim())
        throw ContractViolation("generator residuals: dimension mismatch");
    const std::size_t d = dyn.dim();
    const double h = dyn.h();
    const double lambda = dyn.lambda();
    const auto& ys = dyn.claims().support();
    const auto& ws = dyn.claims().weights();

    std::uint32_t n_paths = 0;
    for (auto p : occ.path) n_paths = std::max(n_paths, p + 1);
    const std::size_t t_count = tests.size();

    // per_path[p * t_count + j]: path-level integral, rescaled so the measure is the path average
    std::vector<double> per_path(static_cast<std::size_t>(n_paths) * t_count, 0.0);
    std::vector<double> f(d), g(d), post(d * ys.size());
    for (std::size_t k = 0; k < occ.size(); ++k) {
        double a = occ.a[k];
        auto x = occ.atom_x(k);
        const ControlPoint& u = occ.controls.at(occ.control[k]);
        dyn.drift(x, u, f);
        double va = -h * a;
        double w = occ.weight[k] * static_cast<double>(n_paths);
        if (lambda > 0.0) {
            for (std::size_t c = 0; c < ys.size(); ++c) {
                dyn.jump(x, u, ys[c], g);
                for (std::size_t r = 0; r < d; ++r) post[c * d + r] = x[r] + g[r];
            }
        }
        for (std::size_t j = 0; j < t_count; ++j) {
            const auto& tf = tests[j];
            double phi = tf.value(a, x);
            double gen = -phi + tf.directional(a, x, va, f);
            if (lambda > 0.0) {
                double jump = 0.0;
                for (std::size_t c = 0; c < ys.size(); ++c) {
                    if (ws[c] == 0.0) continue;
                    jump += ws[c] * (tf.value(a, std::span<const double>(post.data() + c * d, d)) - phi);
                }
                gen += lambda * jump;
            }
            per_path[occ.path[k] * t_count + j] += w * gen;
        }
    }

    std::vector<GeneratorResidual> out(t_count);
    for (std::size_t j = 0; j < t_count; ++j) {
        double start = tests[j].value(a0, x0);
        CompensatedSum sum;
        for (std::uint32_t p = 0; p < n_paths; ++p) sum.add(per_path[p * t_count + j]);
        double mean = sum.value() / n_paths;
        double var = 0.0;
        if (n_paths > 1) {
            for (std::uint32_t p = 0; p < n_paths; ++p) {
                double dlt = per_path[p * t_count + j] - mean;
                var += dlt * dlt;
            }
            var /= static_cast<double>(n_paths - 1);
        }
        out[j].name = tests[j].name;
        out[j].residual = start + mean;
        out[j].std_error = std::sqrt(var / n_paths);
    }
    return out;
}

StateGrid with_discount_axis(const StateGrid& grid, const std::vector<double>& a_nodes) {
    std::vector<GridBlock> blocks;
    blocks.emplace_back(AxisBlock{0, a_nodes});
    for (const auto& b : grid.blocks()) {
        if (const auto* ab = std::get_if<AxisBlock>(&b)) {
            AxisBlock c = *ab;
            c.coord += 1;
            blocks.emplace_back(std::move(c));
        } else {
            SimplexBlock c = std::get<SimplexBlock>(b);
            c.coord_s += 1;
            c.coord_i += 1;
            blocks.emplace_back(c);
        }
    }
    return StateGrid(grid.dim() + 1, std::move(blocks));
}

}  // namespace runmax
