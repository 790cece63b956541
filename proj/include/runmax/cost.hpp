#pragma once

#include <functional>
#include <span>
#include <string>

#include "runmax/model.hpp"

namespace runmax {

/// Running cost L(x) > 0 on the flat state.
using CostFn = std::function<double(std::span<const double>)>;

/// L = base + capital_weight * (x_hi - clamp(x)) / (x_hi - x_lo) + infection_weight * I0,
/// where clamp(x) keeps the capital inside the truncation window.
struct CostSpec {
    double base = 1.0;
    double capital_weight = 0.0;
    double infection_weight = 0.0;

    void validate() const;
};

CostFn constant_cost(double c);
CostFn sir_cost(const CostSpec& spec, const SirParams& params);

}  // namespace runmax
