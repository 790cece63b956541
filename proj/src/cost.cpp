#include "runmax/cost.hpp"

#include <algorithm>

#include "runmax/errors.hpp"

namespace runmax {

void CostSpec::validate() const {
    if (!(base > 0.0)) throw ConfigError("cost: base must be > 0");
    if (capital_weight < 0.0) throw ConfigError("cost: capital_weight must be >= 0");
    if (infection_weight < 0.0) throw ConfigError("cost: infection_weight must be >= 0");
}

CostFn constant_cost(double c) {
    if (!(c > 0.0)) throw ConfigError("cost: constant must be > 0");
    return [c](std::span<const double>) { return c; };
}

CostFn sir_cost(const CostSpec& spec, const SirParams& params) {
    spec.validate();
    const std::size_t n = params.n;
    const Truncation tr = params.truncation;
    return [spec, n, tr](std::span<const double> x) {
        if (x.size() != 2 * n + 1) throw ContractViolation("cost: state has wrong dimension");
        double cap = std::clamp(x[2 * n], tr.x_lo, tr.x_hi);
        double i0 = mean_infection(x.subspan(n, n));
        return spec.base + spec.capital_weight * (tr.x_hi - cap) / (tr.x_hi - tr.x_lo) + spec.infection_weight * i0;
    };
}

}  // namespace runmax
