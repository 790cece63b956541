#include "runmax/model.hpp"

#include <algorithm>
#include <cmath>

#include "runmax/errors.hpp"

namespace runmax {

namespace {

// Locate x in increasing nodes; returns lower index and fraction, clamped.
std::pair<std::size_t, double> bracket(const std::vector<double>& nodes, double x) {
    if (nodes.size() == 1 || x <= nodes.front()) return {0, 0.0};
    if (x >= nodes.back()) return {nodes.size() - 2, 1.0};
    auto it = std::upper_bound(nodes.begin(), nodes.end(), x);
    std::size_t k = static_cast<std::size_t>(it - nodes.begin()) - 1;
    double frac = (x - nodes[k]) / (nodes[k + 1] - nodes[k]);
    return {k, frac};
}

void require(bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(msg);
}

}  // namespace

bool NetworkState::in_triangle(double tol) const {
    if (s.size() != i.size()) return false;
    for (std::size_t j = 0; j < s.size(); ++j) {
        if (s[j] < -tol || i[j] < -tol || s[j] + i[j] > 1.0 + tol) return false;
    }
    return true;
}

double PremiumTable::eval(std::size_t level, double i_mean_value, double u_value) const {
    const auto& slice = values.at(level);
    auto [a, fa] = bracket(i_mean, i_mean_value);
    auto [b, fb] = bracket(u, u_value);
    auto at = [&](std::size_t r, std::size_t c) {
        r = std::min(r, i_mean.size() - 1);
        c = std::min(c, u.size() - 1);
        return slice[r][c];
    };
    return (1 - fa) * (1 - fb) * at(a, b) + fa * (1 - fb) * at(a + 1, b) +
           (1 - fa) * fb * at(a, b + 1) + fa * fb * at(a + 1, b + 1);
}

double Truncation::taper(double x) const {
    auto smooth = [](double t) { return t * t * (3.0 - 2.0 * t); };
    if (x >= x_lo && x <= x_hi) return 1.0;
    if (margin <= 0.0) return 0.0;
    double d = x < x_lo ? (x_lo - x) / margin : (x - x_hi) / margin;
    if (d >= 1.0) return 0.0;
    return 1.0 - smooth(d);
}

void SirParams::validate() const {
    require(n >= 1, "n must be >= 1");
    require(beta.size() == n, "beta must have n = " + std::to_string(n) + " entries");
    require(gamma.size() == n, "gamma must have n = " + std::to_string(n) + " entries");
    for (std::size_t j = 0; j < n; ++j) {
        require(beta[j] >= 0.0 && std::isfinite(beta[j]), "beta[" + std::to_string(j) + "] must be >= 0");
        require(gamma[j] >= 0.0 && std::isfinite(gamma[j]), "gamma[" + std::to_string(j) + "] must be >= 0");
    }
    require(lambda >= 0.0, "lambda must be >= 0");
    require(lambda < 1.0, "lambda must be < 1 (got " + std::to_string(lambda) + ")");
    require(u_min > 0.0 && u_min <= u_max, "u_min must lie in (0, u_max]");
    require(u_max <= 1.0, "u_max must be <= 1");
    require(h > 0.0, "h must be > 0");
    require(!prev_levels.empty(), "prev_levels must be non-empty");
    for (std::size_t k = 0; k < prev_levels.size(); ++k) {
        require(prev_levels[k].size() == n,
                "prev_levels[" + std::to_string(k) + "] must have n entries");
        for (double p : prev_levels[k])
            require(p >= 1.0 && std::isfinite(p),
                    "prev_levels[" + std::to_string(k) + "] components must be >= 1");
    }
    require(truncation.x_lo < truncation.x_hi, "truncation: x_lo must be < x_hi");
    require(truncation.margin > 0.0, "truncation: margin must be > 0");
    if (premium_mode == PremiumMode::Table) {
        require(premium_table.has_value(), "premium table mode without a table");
        const auto& t = *premium_table;
        require(t.i_mean.size() >= 2 && t.u.size() >= 2, "premium table needs >= 2 nodes per axis");
        require(std::is_sorted(t.i_mean.begin(), t.i_mean.end()) &&
                    std::is_sorted(t.u.begin(), t.u.end()),
                "premium table axes must be increasing");
        require(t.values.size() == prev_levels.size(), "premium table needs one slice per protection level");
        for (const auto& slice : t.values) {
            require(slice.size() == t.i_mean.size(), "premium table slice has wrong row count");
            for (const auto& row : slice) require(row.size() == t.u.size(), "premium table row has wrong length");
        }
    }
}

std::optional<std::size_t> SirParams::level_index(const std::vector<double>& p) const {
    for (std::size_t k = 0; k < prev_levels.size(); ++k)
        if (prev_levels[k] == p) return k;
    return std::nullopt;
}

void check_control(const ControlPoint& ctrl, const SirParams& params) {
    if (ctrl.u < params.u_min - 1e-12 || ctrl.u > params.u_max + 1e-12)
        throw ContractViolation("control u=" + std::to_string(ctrl.u) + " outside [u_min, u_max]");
    if (!params.level_index(ctrl.p)) throw ContractViolation("protection vector not in prev_levels");
}

double mean_infection(std::span<const double> i) {
    // Offsets from i[0] sum to exactly zero when all levels agree, so the mean is exact there.
    double dev = 0.0;
    for (double v : i) dev += v - i[0];
    return i[0] + dev / static_cast<double>(i.size());
}

double threshold_excess(std::span<const double> i, const std::vector<double>& p) {
    if (p.size() != i.size()) throw ContractViolation("protection vector has wrong length");
    double i0 = mean_infection(i);
    double acc = 0.0;
    for (std::size_t j = 0; j < i.size(); ++j) acc += std::max(i0 / p[j] - i[j], 0.0);
    return acc;
}

double net_premium(std::span<const double>, std::span<const double> i, const ControlPoint& ctrl,
                   const SirParams& params, const ClaimLaw& claims) {
    return params.lambda * claims.mean() * ctrl.u * threshold_excess(i, ctrl.p);
}

double premium_rate(std::span<const double> s, std::span<const double> i, const ControlPoint& ctrl,
                    const SirParams& params, const ClaimLaw& claims) {
    double base = 0.0;
    if (params.premium_mode == PremiumMode::Net) {
        base = net_premium(s, i, ctrl, params, claims);
    } else {
        auto level = params.level_index(ctrl.p);
        if (!level) throw ContractViolation("protection vector not in prev_levels");
        base = params.premium_table->eval(*level, mean_infection(i), ctrl.u);
    }
    return base + params.premium_offset;
}

std::vector<double> sir_drift(const NetworkState& state, const ControlPoint& ctrl,
                              const SirParams& params, const ClaimLaw& claims) {
    const std::size_t n = params.n;
    if (state.s.size() != n || state.i.size() != n || ctrl.p.size() != n)
        throw ContractViolation("sir_drift: state/control dimension does not match n");
    std::vector<double> v(2 * n + 1);
    for (std::size_t j = 0; j < n; ++j) {
        double infection = params.beta[j] * ctrl.u * state.s[j] * state.i[j];
        v[j] = -infection;
        v[n + j] = infection - params.gamma[j] * state.i[j];
    }
    v[2 * n] = premium_rate(state.s, state.i, ctrl, params, claims);
    return v;
}

NetworkState sir_jump(const NetworkState& state, const ControlPoint& ctrl, double y,
                      const SirParams& params) {
    const std::size_t n = params.n;
    if (state.s.size() != n || state.i.size() != n || ctrl.p.size() != n)
        throw ContractViolation("sir_jump: state/control dimension does not match n");
    if (y < 0.0) throw ContractViolation("sir_jump: negative claim size");
    NetworkState out = state;
    double i0 = mean_infection(state.i);
    double paid = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        double threshold = i0 / ctrl.p[j];
        if (threshold <= state.i[j]) continue;
        out.i[j] = threshold;
        out.s[j] = std::min(state.s[j], 1.0 - threshold);
        paid += threshold - state.i[j];
    }
    out.x = state.x - ctrl.u * y * paid;
    return out;
}

std::vector<double> to_flat(const NetworkState& state) {
    std::vector<double> v;
    v.reserve(2 * state.s.size() + 1);
    v.insert(v.end(), state.s.begin(), state.s.end());
    v.insert(v.end(), state.i.begin(), state.i.end());
    v.push_back(state.x);
    return v;
}

NetworkState from_flat(std::span<const double> flat, std::size_t n, double a) {
    if (flat.size() != 2 * n + 1) throw ContractViolation("from_flat: expected 2n+1 coordinates");
    NetworkState st;
    st.s.assign(flat.begin(), flat.begin() + static_cast<std::ptrdiff_t>(n));
    st.i.assign(flat.begin() + static_cast<std::ptrdiff_t>(n), flat.begin() + static_cast<std::ptrdiff_t>(2 * n));
    st.x = flat[2 * n];
    st.a = a;
    return st;
}

std::vector<ControlPoint> control_grid(const SirParams& params, std::size_t u_levels) {
    if (u_levels == 0) throw ConfigError("control grid needs at least one u level");
    std::vector<ControlPoint> out;
    for (const auto& p : params.prev_levels) {
        for (std::size_t k = 0; k < u_levels; ++k) {
            double u = u_levels == 1 ? params.u_max
                                     : params.u_min + (params.u_max - params.u_min) *
                                                          static_cast<double>(k) /
                                                          static_cast<double>(u_levels - 1);
            out.push_back({u, p});
        }
    }
    return out;
}

}  // namespace runmax
