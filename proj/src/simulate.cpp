#include "runmax/simulate.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <random>

#include "runmax/errors.hpp"

namespace runmax {

namespace {

std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

constexpr double kInvariantTol = 1e-9;

void check_state(const Dynamics& dyn, std::span<const double> x, bool perturbed, double t) {
    for (double v : x)
        if (!std::isfinite(v)) throw IntegrationError("non-finite state", t);
    const std::size_t n = dyn.sir_edges();
    if (n == 0 || perturbed) return;
    for (std::size_t j = 0; j < n; ++j) {
        double s = x[j], i = x[n + j];
        if (s < -kInvariantTol || i < -kInvariantTol || s + i > 1.0 + kInvariantTol)
            throw IntegrationError("edge " + std::to_string(j) + " left the (s, i) triangle", t);
    }
}

// 8-point Gauss-Legendre on [-1, 1].
constexpr std::array<double, 8> kGlNodes = {-0.9602898564975363, -0.7966664774136267, -0.5255324099163290,
                                            -0.1834346424956498, 0.1834346424956498,  0.5255324099163290,
                                            0.7966664774136267,  0.9602898564975363};
constexpr std::array<double, 8> kGlWeights = {0.1012285362903763, 0.2223810344533745, 0.3137066458778873,
                                              0.3626837833783620, 0.3626837833783620, 0.3137066458778873,
                                              0.2223810344533745, 0.1012285362903763};

// int_0^len e^{-delta s} basis(s) ds by Gauss-Legendre.
template <class F>
double gl_integral(double len, double delta, F basis) {
    double acc = 0.0;
    for (std::size_t k = 0; k < 8; ++k) {
        double s = 0.5 * len * (kGlNodes[k] + 1.0);
        acc += kGlWeights[k] * std::exp(-delta * s) * basis(s);
    }
    return 0.5 * len * acc;
}

/**
 * Drives one path: splits [0, T] at jump and switch times into segments,
 * subdivides each into `m` record intervals of `k` RK4 steps, and reports
 * record points and jumps to the visitor.
 */
class PathEngine {
public:
    PathEngine(const Dynamics& dyn, const PolicySpec& pol, double horizon, double dt, const std::vector<double>& e)
        : dyn_(dyn), pol_(pol), horizon_(horizon), dt_(dt), e_(e), d_(dyn.dim()) {
        if (!(horizon > 0.0)) throw ConfigError("simulation horizon must be > 0");
        if (!(dt > 0.0)) throw ConfigError("simulation dt must be > 0");
        if (!e_.empty()) {
            if (e_.size() != d_) throw ContractViolation("perturbation has wrong dimension");
            double n2 = 0.0;
            for (double v : e_) n2 += v * v;
            if (std::sqrt(n2) > 1.0 + 1e-12) throw ConfigError("perturbation magnitude must be <= 1");
        }
        k1_.resize(d_);
        k2_.resize(d_);
        k3_.resize(d_);
        k4_.resize(d_);
        tmp_.resize(d_);
        shifted_.resize(d_);
    }

    /// record_dt <= 0 records every integrator step; `even` forces an even
    /// number of record intervals per segment.
    template <class Visitor>
    void run(std::span<const double> x0, const std::vector<JumpEvent>& events, double record_dt, bool even,
             Visitor& vis, const std::vector<double>& extra_cuts = {}) {
        if (x0.size() != d_) throw ContractViolation("initial state has wrong dimension");
        std::vector<double> x(x0.begin(), x0.end());
        check_state(dyn_, x, !e_.empty(), 0.0);

        std::vector<double> cuts{0.0};
        for (const auto& ev : events)
            if (ev.time > 0.0 && ev.time < horizon_) cuts.push_back(ev.time);
        for (double b : pol_.breakpoints(horizon_)) cuts.push_back(b);
        for (double b : extra_cuts)
            if (b > 0.0 && b < horizon_) cuts.push_back(b);
        cuts.push_back(horizon_);
        std::sort(cuts.begin(), cuts.end());
        cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

        std::size_t next_event = 0;
        while (next_event < events.size() && events[next_event].time <= 0.0) ++next_event;
        std::vector<double> pre(d_), g(d_);
        for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
            double t0 = cuts[c], t1 = cuts[c + 1];
            double len = t1 - t0;
            std::size_t m, k;
            if (record_dt <= 0.0) {
                m = static_cast<std::size_t>(std::ceil(len / dt_ - 1e-9));
                m = std::max<std::size_t>(m, 1);
                k = 1;
            } else {
                m = static_cast<std::size_t>(std::ceil(len / record_dt - 1e-9));
                m = std::max<std::size_t>(m, 1);
                if (even && m % 2 == 1) ++m;
                k = static_cast<std::size_t>(std::ceil(len / static_cast<double>(m) / dt_ - 1e-9));
                k = std::max<std::size_t>(k, 1);
            }
            double step = len / static_cast<double>(m * k);
            vis.segment(t0, t1, m);
            std::uint32_t ctrl = pol_.select(t0, x);
            vis.record(0, t0, x, ctrl);
            for (std::size_t r = 0; r < m; ++r) {
                for (std::size_t s = 0; s < k; ++s) {
                    double t = t0 + static_cast<double>(r * k + s) * step;
                    ctrl = pol_.select(t, x);
                    rk4(x, pol_.controls()[ctrl], step);
                    check_state(dyn_, x, !e_.empty(), t + step);
                }
                double tr = r + 1 == m ? t1 : t0 + static_cast<double>((r + 1) * k) * step;
                std::uint32_t rec_ctrl = r + 1 == m ? ctrl : pol_.select(tr, x);
                vis.record(r + 1, tr, x, rec_ctrl);
            }
            while (next_event < events.size() && events[next_event].time <= t1 && t1 < horizon_) {
                const auto& ev = events[next_event++];
                pre = x;
                std::uint32_t jc = pol_.select(t1, pre);
                jump_increment(pre, pol_.controls()[jc], ev.size, g);
                for (std::size_t r = 0; r < d_; ++r) x[r] = pre[r] + g[r];
                check_state(dyn_, x, !e_.empty(), t1);
                vis.jump(t1, pre, x, ev, jc);
            }
        }
    }

private:
    void drift(std::span<const double> x, const ControlPoint& u, std::span<double> out) {
        if (e_.empty()) {
            dyn_.drift(x, u, out);
            return;
        }
        for (std::size_t r = 0; r < d_; ++r) shifted_[r] = x[r] + e_[r];
        dyn_.drift(shifted_, u, out);
    }

    void jump_increment(std::span<const double> x, const ControlPoint& u, double y, std::span<double> out) {
        if (e_.empty()) {
            dyn_.jump(x, u, y, out);
            return;
        }
        for (std::size_t r = 0; r < d_; ++r) shifted_[r] = x[r] + e_[r];
        dyn_.jump(shifted_, u, y, out);
        for (std::size_t r = 0; r < d_; ++r) out[r] += e_[r];
    }

    void rk4(std::vector<double>& x, const ControlPoint& u, double step) {
        drift(x, u, k1_);
        for (std::size_t r = 0; r < d_; ++r) tmp_[r] = x[r] + 0.5 * step * k1_[r];
        drift(tmp_, u, k2_);
        for (std::size_t r = 0; r < d_; ++r) tmp_[r] = x[r] + 0.5 * step * k2_[r];
        drift(tmp_, u, k3_);
        for (std::size_t r = 0; r < d_; ++r) tmp_[r] = x[r] + step * k3_[r];
        drift(tmp_, u, k4_);
        for (std::size_t r = 0; r < d_; ++r) x[r] += step / 6.0 * (k1_[r] + 2 * k2_[r] + 2 * k3_[r] + k4_[r]);
    }

    const Dynamics& dyn_;
    const PolicySpec& pol_;
    double horizon_;
    double dt_;
    std::vector<double> e_;
    std::size_t d_;
    std::vector<double> k1_, k2_, k3_, k4_, tmp_, shifted_;
};

struct TrajectoryRecorder {
    Trajectory& tr;
    double a0;
    double h;
    bool first = true;

    void segment(double, double, std::size_t) {}
    void record(std::size_t k, double t, std::span<const double> x, std::uint32_t ctrl) {
        if (k == 0 && !first) {
            // segment start repeats the previous end (or the post-jump state)
            tr.controls.back() = ctrl;
            return;
        }
        first = false;
        tr.times.push_back(t);
        tr.states.insert(tr.states.end(), x.begin(), x.end());
        tr.a.push_back(a0 * std::exp(-h * t));
        tr.jump_flags.push_back(0);
        tr.controls.push_back(ctrl);
    }
    void jump(double, std::span<const double> pre, std::span<const double> post, const JumpEvent&, std::uint32_t) {
        tr.left_limits.insert(tr.left_limits.end(), pre.begin(), pre.end());
        std::copy(post.begin(), post.end(), tr.states.end() - static_cast<std::ptrdiff_t>(post.size()));
        tr.jump_flags.back() = 1;
    }
};

struct EndpointRecorder {
    std::vector<double> last;
    void segment(double, double, std::size_t) {}
    void record(std::size_t, double, std::span<const double> x, std::uint32_t) { last.assign(x.begin(), x.end()); }
    void jump(double, std::span<const double>, std::span<const double> post, const JumpEvent&, std::uint32_t) {
        last.assign(post.begin(), post.end());
    }
};

struct SnapshotRecorder {
    const std::vector<double>& times;
    std::vector<double>& out;  // flat, dim per snapshot time
    std::size_t dim;
    double seg_end = 0.0;

    void segment(double, double s1, std::size_t) { seg_end = s1; }
    void record(std::size_t k, double t, std::span<const double> x, std::uint32_t) {
        if (k == 0 && t == 0.0) store(t, x);
        if (t != seg_end) return;
        store(t, x);
    }
    void store(double t, std::span<const double> x) {
        for (std::size_t j = 0; j < times.size(); ++j)
            if (times[j] == t) std::copy(x.begin(), x.end(), out.begin() + static_cast<std::ptrdiff_t>(j * dim));
    }
    void jump(double, std::span<const double>, std::span<const double>, const JumpEvent&, std::uint32_t) {}
};

struct OccupationRecorder {
    OccupationMeasure& occ;
    double a0;
    double h;
    Quadrature quad;
    std::uint32_t path = 0;

    double t0 = 0.0, delta = 0.0;
    std::size_t m = 0;
    std::array<double, 3> base{};

    void segment(double s0, double s1, std::size_t intervals) {
        t0 = s0;
        m = intervals;
        delta = (s1 - s0) / static_cast<double>(m);
        if (quad == Quadrature::Quadratic) {
            base[0] = gl_integral(2.0, delta, [](double s) { return 0.5 * (s - 1.0) * (s - 2.0); });
            base[1] = gl_integral(2.0, delta, [](double s) { return -s * (s - 2.0); });
            base[2] = gl_integral(2.0, delta, [](double s) { return 0.5 * s * (s - 1.0); });
        } else {
            base[0] = gl_integral(1.0, delta, [](double s) { return 1.0 - s; });
            base[1] = gl_integral(1.0, delta, [](double s) { return s; });
        }
    }

    double weight(std::size_t k) const {
        auto disc = [&](std::size_t j) { return std::exp(-(t0 + static_cast<double>(j) * delta)) * delta; };
        double w = 0.0;
        if (quad == Quadrature::Quadratic) {
            if (k % 2 == 1) return disc(k - 1) * base[1];
            if (k >= 2) w += disc(k - 2) * base[2];
            if (k < m) w += disc(k) * base[0];
        } else {
            if (k >= 1) w += disc(k - 1) * base[1];
            if (k < m) w += disc(k) * base[0];
        }
        return w;
    }

    void record(std::size_t k, double t, std::span<const double> x, std::uint32_t ctrl) {
        double w = weight(k);
        if (w > 0.0) occ.push(a0 * std::exp(-h * t), x, ctrl, path, w);
    }
    void jump(double, std::span<const double>, std::span<const double>, const JumpEvent&, std::uint32_t) {}
};

}  // namespace

PolicySpec PolicySpec::constant(ControlPoint ctrl) {
    PolicySpec p;
    p.kind_ = Kind::Constant;
    p.controls_ = {std::move(ctrl)};
    p.starts_ = {0.0};
    return p;
}

PolicySpec PolicySpec::piecewise(std::vector<ScheduleEntry> schedule) {
    if (schedule.empty()) throw ConfigError("piecewise policy needs at least one entry");
    if (schedule.front().start != 0.0) throw ConfigError("piecewise policy must start at t = 0");
    PolicySpec p;
    p.kind_ = Kind::PiecewiseConstant;
    for (std::size_t k = 0; k < schedule.size(); ++k) {
        if (k > 0 && !(schedule[k].start > schedule[k - 1].start))
            throw ConfigError("piecewise policy start times must be strictly increasing");
        p.starts_.push_back(schedule[k].start);
        p.controls_.push_back(schedule[k].ctrl);
    }
    return p;
}

PolicySpec PolicySpec::feedback(std::shared_ptr<const FeedbackTable> table) {
    if (!table || table->choice.size() != table->grid.size())
        throw ConfigError("feedback table must assign a control to every grid node");
    for (auto c : table->choice)
        if (c >= table->controls.size()) throw ConfigError("feedback table refers to an unknown control");
    PolicySpec p;
    p.kind_ = Kind::Feedback;
    p.controls_ = table->controls;
    p.table_ = std::move(table);
    return p;
}

std::uint32_t PolicySpec::select(double t, std::span<const double> x) const {
    switch (kind_) {
        case Kind::Constant:
            return 0;
        case Kind::PiecewiseConstant: {
            auto it = std::upper_bound(starts_.begin(), starts_.end(), t);
            return static_cast<std::uint32_t>(it - starts_.begin()) - 1;
        }
        case Kind::Feedback: {
            thread_local std::vector<NodeWeight> st;
            table_->grid.interpolation(x, st);
            std::size_t best = st.front().node;
            double bw = -1.0;
            for (const auto& e : st)
                if (e.weight > bw || (e.weight == bw && e.node < best)) {
                    bw = e.weight;
                    best = e.node;
                }
            return table_->choice[best];
        }
    }
    return 0;
}

std::vector<double> PolicySpec::breakpoints(double horizon) const {
    std::vector<double> out;
    if (kind_ != Kind::PiecewiseConstant) return out;
    for (double s : starts_)
        if (s > 0.0 && s < horizon) out.push_back(s);
    return out;
}

void PolicySpec::validate(const SirParams& params) const {
    for (const auto& c : controls_) check_control(c, params);
}

std::uint64_t path_seed(std::uint64_t master, std::uint64_t path) { return splitmix64(master ^ path); }

std::vector<JumpEvent> draw_events(double lambda, const ClaimLaw& claims, double horizon, std::uint64_t seed) {
    std::vector<JumpEvent> out;
    if (lambda <= 0.0) return out;
    std::mt19937_64 rng(seed);
    double t = 0.0;
    while (true) {
        t += -std::log1p(-uniform01(rng)) / lambda;
        if (t >= horizon) break;
        std::size_t k = claims.sample_index(uniform01(rng));
        out.push_back({t, k, claims.support()[k]});
    }
    return out;
}

Trajectory simulate_path(const Dynamics& dyn, std::span<const double> x0, const PolicySpec& policy,
                         const SimOptions& opts) {
    if (!(opts.horizon > 0.0)) throw ConfigError("simulation horizon must be > 0");
    return simulate_path(dyn, x0, policy, opts, draw_events(dyn.lambda(), dyn.claims(), opts.horizon, opts.seed));
}

Trajectory simulate_path(const Dynamics& dyn, std::span<const double> x0, const PolicySpec& policy,
                         const SimOptions& opts, const std::vector<JumpEvent>& events) {
    Trajectory tr;
    tr.dim = dyn.dim();
    tr.seed = opts.seed;
    tr.events = events;
    PathEngine engine(dyn, policy, opts.horizon, opts.dt, opts.perturbation);
    TrajectoryRecorder rec{tr, opts.a0, dyn.h()};
    engine.run(x0, events, 0.0, false, rec);
    return tr;
}

std::vector<double> simulate_endpoint(const Dynamics& dyn, std::span<const double> x0, const PolicySpec& policy,
                                      const SimOptions& opts, const std::vector<JumpEvent>& events) {
    PathEngine engine(dyn, policy, opts.horizon, opts.dt, opts.perturbation);
    EndpointRecorder rec;
    engine.run(x0, events, opts.horizon, false, rec);
    return rec.last;
}

std::vector<double> simulate_snapshots(const Dynamics& dyn, std::span<const double> x0, const PolicySpec& policy,
                                       const SimOptions& opts, const std::vector<JumpEvent>& events,
                                       const std::vector<double>& times) {
    for (double t : times)
        if (!(t >= 0.0 && t <= opts.horizon)) throw ConfigError("snapshot time outside [0, horizon]");
    PathEngine engine(dyn, policy, opts.horizon, opts.dt, opts.perturbation);
    std::vector<double> out(times.size() * dyn.dim(), std::numeric_limits<double>::quiet_NaN());
    SnapshotRecorder rec{times, out, dyn.dim()};
    engine.run(x0, events, opts.horizon, false, rec, times);
    return out;
}

OccupationMeasure estimate_occupation(const Dynamics& dyn, std::span<const double> x0, const PolicySpec& policy,
                                      const OccupationOptions& opts) {
    if (opts.paths == 0) throw ConfigError("occupation estimate needs at least one path");
    if (!(opts.record_dt > 0.0)) throw ConfigError("record_dt must be > 0");
    OccupationMeasure occ;
    occ.dim = dyn.dim();
    occ.controls = policy.controls();
    occ.meta.paths = opts.paths;
    occ.meta.horizon = opts.horizon;
    occ.meta.seed = opts.seed;
    occ.meta.tail_mass = std::exp(-opts.horizon);
    occ.meta.quadrature = opts.quadrature == Quadrature::Quadratic ? "quadratic" : "trapezoid";
    if (occ.meta.tail_mass > opts.tail_tol)
        occ.meta.warning = "horizon leaves discounted tail mass " + std::to_string(occ.meta.tail_mass) +
                           " above tolerance";

    PathEngine engine(dyn, policy, opts.horizon, opts.dt, {});
    OccupationRecorder rec{occ, opts.a0, dyn.h(), opts.quadrature};
    for (std::size_t p = 0; p < opts.paths; ++p) {
        rec.path = static_cast<std::uint32_t>(p);
        auto events = draw_events(dyn.lambda(), dyn.claims(), opts.horizon, path_seed(opts.seed, p));
        engine.run(x0, events, opts.record_dt, opts.quadrature == Quadrature::Quadratic, rec);
    }
    occ.normalize();
    return occ;
}

}  // namespace runmax
