#include "runmax/harness.hpp"

#include <algorithm>
#include <cmath>

#include "runmax/errors.hpp"
#include "runmax/simulate.hpp"

namespace runmax {

namespace {

double norm2(std::span<const double> v) {
    double acc = 0.0;
    for (double x : v) acc += x * x;
    return std::sqrt(acc);
}

double dist(std::span<const double> a, std::span<const double> b) {
    double acc = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) acc += (a[k] - b[k]) * (a[k] - b[k]);
    return std::sqrt(acc);
}

struct Moments {
    std::vector<double> sum, sum2;
    explicit Moments(std::size_t n) : sum(n, 0.0), sum2(n, 0.0) {}
    void add(std::size_t k, double v) {
        sum[k] += v;
        sum2[k] += v * v;
    }
    double mean(std::size_t k, std::size_t n) const { return sum[k] / static_cast<double>(n); }
    double se(std::size_t k, std::size_t n) const {
        double m = mean(k, n);
        double var = (sum2[k] / static_cast<double>(n) - m * m) * static_cast<double>(n) / static_cast<double>(n - 1);
        return std::sqrt(std::max(var, 0.0) / static_cast<double>(n));
    }
};

HarnessRow make_row(double t, std::string quantity, double lhs, double se, double rhs) {
    HarnessRow r;
    r.t = t;
    r.quantity = std::move(quantity);
    r.lhs = lhs;
    r.std_error = se;
    r.rhs = rhs;
    r.margin = rhs + 3.0 * se - lhs;
    r.pass = r.margin >= 0.0;
    return r;
}

}  // namespace

HarnessReport moment_inequality_harness(const Dynamics& dyn, const LipschitzProfile& profile, int spec,
                                        const HarnessTrial& trial) {
    if (spec < 1 || spec > 4) throw ConfigError("harness spec must be 1, 2, 3 or 4");
    const std::size_t d = dyn.dim();
    if (trial.x0.size() != d) throw ContractViolation("harness: x0 has wrong dimension");
    if ((spec == 1 || spec == 4) && trial.x0_other.size() != d)
        throw ContractViolation("harness: spec needs a second initial datum");
    if ((spec == 2 || spec == 4) && trial.perturbation.size() != d)
        throw ContractViolation("harness: spec needs a perturbation vector");
    if (trial.paths < 2) throw ConfigError("harness needs at least 2 paths");
    if (spec == 4 && profile.jump_map_lip > 1.0 + 1e-9)
        throw PreconditionError("harness spec 4: post-jump maps are not 1-Lipschitz (sampled constant " +
                                std::to_string(profile.jump_map_lip) + ")");
    if (spec == 4 && trial.q < 2.0) throw ConfigError("harness spec 4 needs q >= 2");

    std::vector<double> times = trial.times;
    std::sort(times.begin(), times.end());
    const double horizon = times.back();
    const std::size_t nt = times.size();
    const double lambda = dyn.lambda();
    const double e_norm = trial.perturbation.empty() ? 0.0 : norm2(trial.perturbation);
    const PolicySpec policy = PolicySpec::constant(trial.control);

    SimOptions shaken{horizon, trial.dt, 0, 1.0, trial.perturbation};
    SimOptions plain{horizon, trial.dt, 0, 1.0, {}};

    Moments m1(nt), m2(nt);
    for (std::size_t p = 0; p < trial.paths; ++p) {
        auto events = draw_events(lambda, dyn.claims(), horizon, path_seed(trial.seed, p));
        std::vector<double> a, b;
        if (spec == 1 || spec == 4) {
            a = simulate_snapshots(dyn, trial.x0, policy, shaken, events, times);
            b = simulate_snapshots(dyn, trial.x0_other, policy, shaken, events, times);
            for (std::size_t k = 0; k < nt; ++k) {
                double r = dist({a.data() + k * d, d}, {b.data() + k * d, d});
                m1.add(k, spec == 1 ? r * r : std::pow(r, trial.q));
            }
        }
        if (spec == 2 || spec == 4) {
            a = simulate_snapshots(dyn, trial.x0, policy, shaken, events, times);
            b = simulate_snapshots(dyn, trial.x0, policy, plain, events, times);
            for (std::size_t k = 0; k < nt; ++k) {
                double r = dist({a.data() + k * d, d}, {b.data() + k * d, d});
                m2.add(k, spec == 2 ? r * r : std::pow(r, trial.q));
            }
        }
        if (spec == 3) {
            a = simulate_snapshots(dyn, trial.x0, policy, shaken, events, times);
            for (std::size_t k = 0; k < nt; ++k) {
                double r = norm2({a.data() + k * d, d});
                m1.add(k, r * r * r * r);
            }
        }
    }

    const double fl = profile.f_lip;
    const std::size_t n = trial.paths;
    HarnessReport rep;
    rep.spec = spec;
    for (std::size_t k = 0; k < nt; ++k) {
        double t = times[k];
        if (spec == 1) {
            double d0 = dist(trial.x0, trial.x0_other);
            double rhs = std::exp((2 * fl + lambda * profile.int_2g_g2) * t) * d0 * d0;
            rep.rows.push_back(make_row(t, "E|X1-X2|^2", m1.mean(k, n), m1.se(k, n), rhs));
        } else if (spec == 2) {
            double rhs = (fl + 2 * lambda * profile.int_1_plus_g_sq) *
                         std::exp((3 * fl + lambda * profile.int_1_4g_2g2) * t) * t * e_norm * e_norm;
            rep.rows.push_back(make_row(t, "E|X+-X|^2", m2.mean(k, n), m2.se(k, n), rhs));
        } else if (spec == 3) {
            // shaken jumps e + g are bounded by |e| + |g|_0(y)
            double g4 = 0.0;
            const auto& w = dyn.claims().weights();
            for (std::size_t c = 0; c < w.size(); ++c) g4 += w[c] * std::pow(e_norm + profile.g_bound[c], 4);
            double x0n = norm2(trial.x0);
            double rhs = std::exp((lambda + 1) * t / 2) *
                         (std::pow(x0n, 4) +
                          std::pow(5.0, 4) * std::max(lambda, 1.0) * (std::pow(profile.f_bound, 4) + g4) * t);
            rep.rows.push_back(make_row(t, "E|X+|^4", m1.mean(k, n), m1.se(k, n), rhs));
        } else {
            double q = trial.q;
            double d0 = dist(trial.x0, trial.x0_other);
            double rhs1 = std::exp(q * fl * t) * std::pow(d0, q);
            rep.rows.push_back(make_row(t, "E|X1-X2|^q", m1.mean(k, n), m1.se(k, n), rhs1));
            double rhs2 = (fl + lambda * q) * std::exp(((2 * q - 1) * fl + lambda * q) * t) * t * std::pow(e_norm, q);
            rep.rows.push_back(make_row(t, "E|X+-X|^q", m2.mean(k, n), m2.se(k, n), rhs2));
        }
    }
    rep.passed = true;
    rep.worst_margin = rep.rows.front().margin;
    for (const auto& r : rep.rows) {
        rep.passed = rep.passed && r.pass;
        rep.worst_margin = std::min(rep.worst_margin, r.margin);
    }
    return rep;
}

PremiumReport premium_drift_check(const SirModel& model, const NetworkState& x0, const ControlPoint& ctrl,
                                  const std::vector<double>& t_values, std::size_t paths, std::uint64_t seed,
                                  PremiumClock clock, double dt) {
    if (t_values.empty()) throw ConfigError("premium check needs at least one time");
    if (paths < 2) throw ConfigError("premium check needs at least 2 paths");
    check_control(ctrl, model.params);
    const std::size_t n = model.params.n;
    Dynamics base = Dynamics::sir(model);
    PremiumReport rep;
    rep.initial_premium = premium_rate(x0.s, x0.i, ctrl, model.params, model.claims);

    Dynamics dyn = base;
    if (clock == PremiumClock::Frozen) {
        double c = rep.initial_premium;
        Truncation tr = model.params.truncation;
        auto drift = [base, c, tr, n](std::span<const double> x, const ControlPoint& u, std::span<double> out) {
            base.drift(x, u, out);
            out[2 * n] = c * tr.taper(x[2 * n]);
        };
        auto jump = [base](std::span<const double> x, const ControlPoint& u, double y, std::span<double> out) {
            base.jump(x, u, y, out);
        };
        dyn = Dynamics(base.dim(), drift, jump, model.claims, model.params.lambda, model.params.h, "sir-frozen-premium");
    }

    std::vector<double> times = t_values;
    std::sort(times.begin(), times.end());
    const double horizon = times.back();
    const std::size_t nt = times.size();
    auto flat0 = to_flat(x0);
    const PolicySpec policy = PolicySpec::constant(ctrl);
    SimOptions opts{horizon, dt, 0, 1.0, {}};
    Moments m(nt);
    for (std::size_t p = 0; p < paths; ++p) {
        auto events = draw_events(dyn.lambda(), dyn.claims(), horizon, path_seed(seed, p));
        auto snap = simulate_snapshots(dyn, flat0, policy, opts, events, times);
        for (std::size_t k = 0; k < nt; ++k) m.add(k, snap[k * dyn.dim() + 2 * n] - x0.x);
    }
    for (double t : t_values) {
        std::size_t k = static_cast<std::size_t>(std::find(times.begin(), times.end(), t) - times.begin());
        PremiumRow row;
        row.t = t;
        row.mean_increment = m.mean(k, paths);
        row.std_error = m.se(k, paths);
        row.ratio = std::abs(row.mean_increment) / t;
        row.ratio_se = row.std_error / t;
        rep.rows.push_back(row);
    }
    // monotone: ratio shrinks as t shrinks
    std::vector<PremiumRow> by_t = rep.rows;
    std::sort(by_t.begin(), by_t.end(), [](const PremiumRow& a, const PremiumRow& b) { return a.t < b.t; });
    rep.monotone_decreasing = true;
    for (std::size_t k = 1; k < by_t.size(); ++k)
        if (!(by_t[k - 1].ratio < by_t[k].ratio)) rep.monotone_decreasing = false;
    return rep;
}

}  // namespace runmax
