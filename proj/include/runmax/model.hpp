#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "runmax/claim_law.hpp"

namespace runmax {

/// Lock-down level u and per-edge protection vector p.
struct ControlPoint {
    double u = 1.0;
    std::vector<double> p;

    bool operator==(const ControlPoint&) const = default;
};

/// Per-edge susceptible/infected fractions, insurer capital x and the
/// discount coordinate a (a = a0 e^{-ht} along paths).
struct NetworkState {
    std::vector<double> s;
    std::vector<double> i;
    double x = 0.0;
    double a = 1.0;

    std::size_t edges() const { return s.size(); }

    /// Membership of (s_j, i_j) in the triangle s + i <= 1, s, i >= 0, up to tol.
    bool in_triangle(double tol = 0.0) const;
};

/// Premium rate table over (average infectiousness, lock-down level), one
/// slice per protection level. Bilinear interpolation, clamped at the edges.
struct PremiumTable {
    std::vector<double> i_mean;
    std::vector<double> u;
    /// values[level][a][b] at (i_mean[a], u[b]).
    std::vector<std::vector<std::vector<double>>> values;

    double eval(std::size_t level, double i_mean_value, double u_value) const;
};

enum class PremiumMode { Net, Table };

struct Truncation {
    double x_lo = -5.0;
    double x_hi = 5.0;
    double margin = 1.0;

    /// C^1 taper: 1 on [x_lo, x_hi], 0 outside [x_lo - margin, x_hi + margin].
    double taper(double x) const;
    double box_lo() const { return x_lo - margin; }
    double box_hi() const { return x_hi + margin; }
};

struct SirParams {
    std::size_t n = 1;
    std::vector<double> beta;
    std::vector<double> gamma;
    double lambda = 0.5;
    double u_min = 0.5;
    double u_max = 1.0;
    std::vector<std::vector<double>> prev_levels;
    double h = 1.0;
    PremiumMode premium_mode = PremiumMode::Net;
    std::optional<PremiumTable> premium_table;
    /// Constant added to the premium rate (used to probe mis-priced premiums).
    double premium_offset = 0.0;
    Truncation truncation;

    /// Throws ConfigError on any violated invariant.
    void validate() const;

    /// Index of p in prev_levels, or nullopt.
    std::optional<std::size_t> level_index(const std::vector<double>& p) const;
};

/// Model parameters plus claim law; the unit every solver consumes.
struct SirModel {
    SirParams params;
    ClaimLaw claims = ClaimLaw::dirac(0.0);
};

/// Check that ctrl is admissible for params (u in bounds, p in Prev).
void check_control(const ControlPoint& ctrl, const SirParams& params);

/// Average infectiousness I0 = (sum_j i_j) / n.
double mean_infection(std::span<const double> i);

/// Sum over edges of the firewall thresholds (I0 / p_j - i_j)^+.
double threshold_excess(std::span<const double> i, const std::vector<double>& p);

/// Net premium c0 = lambda E[C1] u sum_j (I0/p_j - i_j)^+.
double net_premium(std::span<const double> s, std::span<const double> i, const ControlPoint& ctrl,
                   const SirParams& params, const ClaimLaw& claims);

/// Premium rate c(s, i, u, p) in the configured mode, offset included.
double premium_rate(std::span<const double> s, std::span<const double> i, const ControlPoint& ctrl,
                    const SirParams& params, const ClaimLaw& claims);

/// Untruncated drift (ds/dt, di/dt, dx/dt), length 2n + 1.
std::vector<double> sir_drift(const NetworkState& state, const ControlPoint& ctrl,
                              const SirParams& params, const ClaimLaw& claims);

/// Post-jump state for a claim of size y; a is left unchanged.
NetworkState sir_jump(const NetworkState& state, const ControlPoint& ctrl, double y,
                      const SirParams& params);

/// Flat layout used by the generic dynamics: (s_1..s_n, i_1..i_n, x).
std::vector<double> to_flat(const NetworkState& state);
NetworkState from_flat(std::span<const double> flat, std::size_t n, double a = 1.0);

/// Control grid: `u_levels` equispaced lock-down levels times every protection level.
std::vector<ControlPoint> control_grid(const SirParams& params, std::size_t u_levels);

}  // namespace runmax
