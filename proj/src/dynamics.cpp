#include "runmax/dynamics.hpp"

#include <algorithm>
#include <string>

#include "runmax/errors.hpp"

namespace runmax {

Dynamics::Dynamics(std::size_t dim, DriftFn drift, JumpFn jump, ClaimLaw claims, double lambda,
                   double h, std::string name)
    : dim_(dim),
      drift_(std::move(drift)),
      jump_(std::move(jump)),
      claims_(std::move(claims)),
      lambda_(lambda),
      h_(h),
      name_(std::move(name)) {
    if (!(lambda_ >= 0.0)) throw ConfigError("dynamics: lambda must be >= 0");
    if (!(h_ > 0.0)) throw ConfigError("dynamics: h must be > 0");
    if (!drift_ || !jump_) throw ContractViolation("dynamics: drift and jump must be callable");
}

Dynamics Dynamics::frozen(std::size_t dim, ClaimLaw claims, double lambda, double h) {
    auto zero_drift = [](std::span<const double>, const ControlPoint&, std::span<double> out) {
        std::fill(out.begin(), out.end(), 0.0);
    };
    auto zero_jump = [](std::span<const double>, const ControlPoint&, double, std::span<double> out) {
        std::fill(out.begin(), out.end(), 0.0);
    };
    return Dynamics(dim, zero_drift, zero_jump, std::move(claims), lambda, h, "frozen");
}

Dynamics Dynamics::pure_discount(double h) {
    Dynamics d = frozen(0, ClaimLaw::dirac(0.0), 0.0, h);
    d.name_ = "pure-discount";
    return d;
}

Dynamics Dynamics::sir(const SirModel& model) {
    model.params.validate();
    auto shared = std::make_shared<const SirModel>(model);
    const std::size_t n = model.params.n;

    auto drift = [shared, n](std::span<const double> x, const ControlPoint& ctrl, std::span<double> out) {
        const SirParams& p = shared->params;
        if (ctrl.p.size() != n) throw ContractViolation("sir dynamics: protection vector has wrong length");
        auto s = x.subspan(0, n);
        auto i = x.subspan(n, n);
        double taper = p.truncation.taper(x[2 * n]);
        for (std::size_t j = 0; j < n; ++j) {
            double infection = p.beta[j] * ctrl.u * s[j] * i[j];
            out[j] = -infection * taper;
            out[n + j] = (infection - p.gamma[j] * i[j]) * taper;
        }
        out[2 * n] = premium_rate(s, i, ctrl, p, shared->claims) * taper;
    };
    auto jump = [shared, n](std::span<const double> x, const ControlPoint& ctrl, double y,
                            std::span<double> out) {
        const SirParams& p = shared->params;
        if (ctrl.p.size() != n) throw ContractViolation("sir dynamics: protection vector has wrong length");
        auto s = x.subspan(0, n);
        auto i = x.subspan(n, n);
        double i0 = mean_infection(i);
        double paid = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            double threshold = i0 / ctrl.p[j];
            out[j] = 0.0;
            out[n + j] = 0.0;
            if (threshold <= i[j]) continue;
            out[j] = std::min(s[j], 1.0 - threshold) - s[j];
            out[n + j] = threshold - i[j];
            paid += threshold - i[j];
        }
        out[2 * n] = -ctrl.u * y * paid * p.truncation.taper(x[2 * n]);
    };
    Dynamics d(2 * n + 1, drift, jump, model.claims, model.params.lambda, model.params.h,
               "sir-n" + std::to_string(n));
    d.sir_edges_ = n;
    d.sir_model_ = shared;
    return d;
}

Dynamics Dynamics::linear_contraction(std::size_t dim, double kappa, double theta, ClaimLaw claims,
                                      double lambda, double h) {
    if (!(theta >= 0.0 && theta <= 1.0)) throw ConfigError("linear contraction: theta must lie in [0, 1]");
    auto drift = [kappa](std::span<const double> x, const ControlPoint& ctrl, std::span<double> out) {
        for (std::size_t k = 0; k < x.size(); ++k) out[k] = -kappa * x[k] + ctrl.u;
    };
    auto jump = [theta](std::span<const double> x, const ControlPoint&, double y, std::span<double> out) {
        double c = theta * std::min(y, 1.0);
        for (std::size_t k = 0; k < x.size(); ++k) out[k] = -c * x[k];
    };
    return Dynamics(dim, drift, jump, std::move(claims), lambda, h, "linear-contraction");
}

void Dynamics::drift(std::span<const double> x, const ControlPoint& u, std::span<double> out) const {
    if (x.size() != dim_ || out.size() != dim_)
        throw ContractViolation("dynamics '" + name_ + "': drift called with dimension " +
                                std::to_string(x.size()) + ", expected " + std::to_string(dim_));
    drift_(x, u, out);
}

void Dynamics::jump(std::span<const double> x, const ControlPoint& u, double y, std::span<double> out) const {
    if (x.size() != dim_ || out.size() != dim_)
        throw ContractViolation("dynamics '" + name_ + "': jump called with dimension " +
                                std::to_string(x.size()) + ", expected " + std::to_string(dim_));
    jump_(x, u, y, out);
}

std::vector<double> Dynamics::drift(std::span<const double> x, const ControlPoint& u) const {
    std::vector<double> out(dim_);
    drift(x, u, out);
    return out;
}

std::vector<double> Dynamics::jump(std::span<const double> x, const ControlPoint& u, double y) const {
    std::vector<double> out(dim_);
    jump(x, u, y, out);
    return out;
}

Dynamics Dynamics::with_h(double h) const {
    Dynamics d = *this;
    if (!(h > 0.0)) throw ConfigError("dynamics: h must be > 0");
    d.h_ = h;
    return d;
}

}  // namespace runmax
