#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "runmax/dynamics.hpp"
#include "runmax/model.hpp"

namespace runmax {

/**
 * Sampled sup-norms and Lipschitz constants of the coefficients.
 *
 * These are upper *estimates*: suprema of Jacobian spectral norms over a
 * finite sample set, not certified bounds. Claim-dependent quantities are
 * kept per support point; the integrals are exact sums against the claim law.
 */
struct LipschitzProfile {
    double f_bound = 0.0;
    double f_lip = 0.0;
    std::vector<double> g_bound;  // sup_x,u |g(x,u,y_k)|
    std::vector<double> g_lip;    // sup_x,u |D_x g(x,u,y_k)|
    /// sup |I + D_x g|: <= 1 means every post-jump map is non-expansive.
    double jump_map_lip = 1.0;
    std::size_t samples = 0;

    double int_g_bound4 = 0.0;      // int |g|_0^4 dP
    double int_2g_g2 = 0.0;         // int (2[g]_1 + [g]_1^2) dP
    double int_1_plus_g_sq = 0.0;   // int (1 + [g]_1)^2 dP
    double int_1_4g_2g2 = 0.0;      // int (1 + 4[g]_1 + 2[g]_1^2) dP

    /// Recompute the integrals from g_bound/g_lip.
    void integrate(const ClaimLaw& claims);
    /// Copy with every sampled constant multiplied by `factor`.
    LipschitzProfile inflated(double factor, const ClaimLaw& claims) const;
};

LipschitzProfile lipschitz_profile(const Dynamics& dyn, const std::vector<ControlPoint>& controls,
                                   const std::vector<std::vector<double>>& samples, double fd_step = 1e-6);

/// SIR profile sampled on the triangle lattice times the truncated capital box.
LipschitzProfile sir_lipschitz_profile(const SirModel& model, std::size_t u_levels = 5, std::size_t si_side = 21,
                                       std::size_t x_nodes = 41);

/// Lower bounds on h required for the L^q equations to be well posed.
struct DiscountCheck {
    double moment_bound = 0.0;  // 1 + (3[f]_1 + lambda int(1 + 4[g]_1 + 2[g]_1^2)) / 4
    double lipschitz_bound = 0.0;  // 2[f]_1 + lambda
    double required = 0.0;
    double h = 0.0;
    bool ok = false;
    std::string message;
};

/// Strict mode inflates the sampled constants by 10% and throws ConfigError
/// when h is too small; permissive mode only fills `message`.
DiscountCheck check_discount(double h, double lambda, const LipschitzProfile& profile, const ClaimLaw& claims,
                             bool strict);

}  // namespace runmax
