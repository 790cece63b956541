#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "runmax/cost.hpp"
#include "runmax/dynamics.hpp"
#include "runmax/harness.hpp"
#include "runmax/model.hpp"
#include "runmax/simulate.hpp"

namespace runmax {

struct GridConfig {
    std::size_t si_side = 11;
    std::size_t x_nodes = 11;
    std::size_t u_levels = 3;
    /// Positive a-nodes of the LP grid (plus a = 0), geometric with this ratio.
    std::size_t a_nodes = 1;
    double a_ratio = 2.0;
};

struct SolverConfig {
    double dt = 1e-2;
    double tol = 1e-9;
    std::size_t max_sweeps = 200000;
    double q = 2.0;
    std::vector<double> q_list;
    double band_factor = 1.0;
    bool strict_h = false;
};

struct RunConfig {
    NetworkState x0;
    std::optional<PolicySpec> policy;
    std::size_t paths = 1000;
    double horizon = 14.0;
    double dt = 1e-2;
    double record_dt = 1e-2;
    std::uint64_t seed = 1;
    std::vector<double> t_values{0.2, 0.1, 0.05};
    PremiumClock premium_clock = PremiumClock::Frozen;
    std::vector<double> perturbation;
    /// State at which `premium` reports c0; defaults to x0.
    std::optional<NetworkState> query;
};

struct ScenarioConfig {
    /// "sir" or "frozen" (same state space, f = g = 0).
    std::string dynamics = "sir";
    SirModel model;
    CostSpec cost;
    GridConfig grid;
    SolverConfig solver;
    RunConfig run;
    std::string output_dir = "out";
    std::string source = "<config>";
    /// FNV-1a over the canonical JSON dump; identical configs hash identically.
    std::uint64_t hash = 0;

    Dynamics make_dynamics() const;
    std::vector<ControlPoint> controls() const;
    CostFn make_cost() const;
    std::vector<double> x0_flat() const;
};

/// Parse and validate; every error is a ConfigError of the form "source:line: message".
ScenarioConfig parse_config(const std::string& text, const std::string& source = "<config>");
ScenarioConfig load_config(const std::string& path);

std::uint64_t fnv1a64(const std::string& bytes);

}  // namespace runmax
