#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "runmax/dynamics.hpp"
#include "runmax/lipschitz.hpp"
#include "runmax/model.hpp"

namespace runmax {

/// One time point of an inequality check: Monte-Carlo left side against the bound.
struct HarnessRow {
    double t = 0.0;
    std::string quantity;
    double lhs = 0.0;
    double std_error = 0.0;
    double rhs = 0.0;
    /// rhs + 3 SE - lhs; the check passes when this is >= 0.
    double margin = 0.0;
    bool pass = false;
};

struct HarnessReport {
    int spec = 0;
    bool passed = false;
    double worst_margin = 0.0;
    std::vector<HarnessRow> rows;
};

struct HarnessTrial {
    std::vector<double> x0;
    /// Second initial datum for the two-solution estimates (specs 1 and 4).
    std::vector<double> x0_other;
    /// Constant shaking offset e, |e| <= 1 (specs 2-4; may be empty for spec 1).
    std::vector<double> perturbation;
    ControlPoint control;
    std::vector<double> times{0.5, 1.0, 2.0};
    std::size_t paths = 10000;
    double dt = 1e-2;
    std::uint64_t seed = 1;
    double q = 4.0;
};

/**
 * Paired-path Monte-Carlo check of the trajectory estimates:
 *   1  E|X1 - X2|^2 against the exponential stability bound,
 *   2  E|X+ - X|^2 for shaken versus unshaken paths,
 *   3  E|X+|^4 against the fourth-moment bound,
 *   4  the L^q versions of 1 and 2 when every post-jump map is non-expansive.
 * Both paths of a pair share jump times and claims.
 */
HarnessReport moment_inequality_harness(const Dynamics& dyn, const LipschitzProfile& profile, int spec,
                                        const HarnessTrial& trial);

enum class PremiumClock {
    /// Premium rate quoted at t = 0 and held constant over the horizon.
    Frozen,
    /// Premium rate re-evaluated at the current state.
    Tracking
};

struct PremiumRow {
    double t = 0.0;
    double mean_increment = 0.0;  // E[X(t) - x0]
    double std_error = 0.0;
    double ratio = 0.0;           // |E[X(t) - x0]| / t
    double ratio_se = 0.0;
};

struct PremiumReport {
    std::vector<PremiumRow> rows;  // in the order of the requested times
    double initial_premium = 0.0;
    bool monotone_decreasing = false;
};

/// |E[X(t) - x0]| / t for each t, with common random numbers across t.
PremiumReport premium_drift_check(const SirModel& model, const NetworkState& x0, const ControlPoint& ctrl,
                                  const std::vector<double>& t_values, std::size_t paths, std::uint64_t seed,
                                  PremiumClock clock, double dt = 1e-2);

}  // namespace runmax
