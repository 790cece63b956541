#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "runmax/dynamics.hpp"
#include "runmax/grid.hpp"
#include "runmax/occupation.hpp"

namespace runmax {

struct ScheduleEntry {
    double start = 0.0;
    ControlPoint ctrl;
};

/// Control chosen at the grid node nearest to the state (largest interpolation weight).
struct FeedbackTable {
    StateGrid grid;
    std::vector<ControlPoint> controls;
    std::vector<std::uint32_t> choice;  // one control index per grid node
};

class PolicySpec {
public:
    enum class Kind { Constant, PiecewiseConstant, Feedback };

    static PolicySpec constant(ControlPoint ctrl);
    /// Entries sorted by start time, the first starting at 0.
    static PolicySpec piecewise(std::vector<ScheduleEntry> schedule);
    static PolicySpec feedback(std::shared_ptr<const FeedbackTable> table);

    Kind kind() const { return kind_; }
    const std::vector<ControlPoint>& controls() const { return controls_; }

    /// Index into controls() of the control applied at (t, x).
    std::uint32_t select(double t, std::span<const double> x) const;
    /// Schedule switching times strictly inside (0, horizon).
    std::vector<double> breakpoints(double horizon) const;

    /// Every emitted control must be admissible for the SIR parameters.
    void validate(const SirParams& params) const;

private:
    Kind kind_ = Kind::Constant;
    std::vector<ControlPoint> controls_;
    std::vector<double> starts_;
    std::shared_ptr<const FeedbackTable> table_;
};

struct JumpEvent {
    double time = 0.0;
    std::size_t claim = 0;
    double size = 0.0;
};

/// Poisson arrival times and claim draws on [0, horizon); depends only on
/// (lambda, claims, horizon, seed), which is what couples paired paths.
std::vector<JumpEvent> draw_events(double lambda, const ClaimLaw& claims, double horizon, std::uint64_t seed);

/// Per-path seed derived from the master seed (master xor path, then mixed).
std::uint64_t path_seed(std::uint64_t master, std::uint64_t path);

struct SimOptions {
    double horizon = 1.0;
    double dt = 1e-2;
    std::uint64_t seed = 0;
    double a0 = 1.0;
    /// Constant shaking offset e (empty = unshaken); |e| <= 1.
    std::vector<double> perturbation;
};

struct Trajectory {
    std::size_t dim = 0;
    std::vector<double> times;
    std::vector<double> states;       // flat, dim per time; post-jump value at jump instants
    std::vector<double> a;
    std::vector<char> jump_flags;
    std::vector<double> left_limits;  // flat, dim per jump, in jump order
    std::vector<std::uint32_t> controls;
    std::vector<JumpEvent> events;
    std::uint64_t seed = 0;

    std::size_t size() const { return times.size(); }
    std::span<const double> state(std::size_t k) const { return {states.data() + k * dim, dim}; }
    std::span<const double> final_state() const { return state(size() - 1); }
};

/// RK4 between jumps with exact insertion of jump and schedule-switch times.
Trajectory simulate_path(const Dynamics& dyn, std::span<const double> x0, const PolicySpec& policy,
                         const SimOptions& opts);
/// Same, with a prescribed event log (common random numbers).
Trajectory simulate_path(const Dynamics& dyn, std::span<const double> x0, const PolicySpec& policy,
                         const SimOptions& opts, const std::vector<JumpEvent>& events);

/// State at the horizon only, without storing the path.
std::vector<double> simulate_endpoint(const Dynamics& dyn, std::span<const double> x0, const PolicySpec& policy,
                                      const SimOptions& opts, const std::vector<JumpEvent>& events);

/// States at the given times (each in [0, horizon]), flat with dim per time.
std::vector<double> simulate_snapshots(const Dynamics& dyn, std::span<const double> x0, const PolicySpec& policy,
                                       const SimOptions& opts, const std::vector<JumpEvent>& events,
                                       const std::vector<double>& times);

enum class Quadrature { Trapezoid, Quadratic };

struct OccupationOptions {
    std::size_t paths = 1000;
    double horizon = 14.0;
    double dt = 1e-2;
    /// Spacing of the recorded atoms; the integrator may step finer.
    double record_dt = 1e-2;
    std::uint64_t seed = 0;
    double a0 = 1.0;
    double tail_tol = 1e-6;
    /// Weights are the exact integrals of e^{-t} against the piecewise
    /// linear (trapezoid) or piecewise quadratic interpolation basis in time.
    Quadrature quadrature = Quadrature::Quadratic;
};

OccupationMeasure estimate_occupation(const Dynamics& dyn, std::span<const double> x0, const PolicySpec& policy,
                                      const OccupationOptions& opts);

}  // namespace runmax
