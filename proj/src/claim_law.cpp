#include "runmax/claim_law.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "runmax/errors.hpp"

namespace runmax {

ClaimLaw::ClaimLaw(std::vector<double> support, std::vector<double> weights)
    : support_(std::move(support)), weights_(std::move(weights)) {
    if (support_.empty()) throw ConfigError("claim law: empty support");
    if (support_.size() != weights_.size())
        throw ConfigError("claim law: support has " + std::to_string(support_.size()) +
                          " points but weights has " + std::to_string(weights_.size()));
    double total = 0.0;
    for (std::size_t k = 0; k < support_.size(); ++k) {
        if (!(support_[k] >= 0.0) || !std::isfinite(support_[k]))
            throw ConfigError("claim law: support point " + std::to_string(k) +
                              " must be finite and >= 0");
        if (!(weights_[k] >= 0.0))
            throw ConfigError("claim law: weight " + std::to_string(k) + " is negative");
        total += weights_[k];
    }
    if (std::abs(total - 1.0) > 1e-12)
        throw ConfigError("claim law: weights sum to " + std::to_string(total) + ", expected 1");

    cumulative_.resize(weights_.size());
    double acc = 0.0;
    for (std::size_t k = 0; k < weights_.size(); ++k) {
        acc += weights_[k];
        cumulative_[k] = acc;
        mean_ += weights_[k] * support_[k];
        moment4_ += weights_[k] * std::pow(support_[k], 4);
    }
    cumulative_.back() = 1.0;
}

ClaimLaw ClaimLaw::dirac(double y) { return ClaimLaw({y}, {1.0}); }

ClaimLaw ClaimLaw::quantize(const std::function<double(double)>& quantile, std::size_t points) {
    if (points == 0) throw ConfigError("claim law: quantization needs at least one point");
    std::vector<double> ys(points);
    std::vector<double> ws(points, 1.0 / static_cast<double>(points));
    for (std::size_t k = 0; k < points; ++k)
        ys[k] = quantile((static_cast<double>(k) + 0.5) / static_cast<double>(points));
    // exact renormalization so the 1e-12 check is immune to 1/points rounding
    double total = 0.0;
    for (double w : ws) total += w;
    for (double& w : ws) w /= total;
    return ClaimLaw(std::move(ys), std::move(ws));
}

double ClaimLaw::max_support() const {
    double m = 0.0;
    for (std::size_t k = 0; k < support_.size(); ++k)
        if (weights_[k] > 0.0) m = std::max(m, support_[k]);
    return m;
}

double ClaimLaw::expect(const std::function<double(double)>& fn) const {
    double acc = 0.0;
    for (std::size_t k = 0; k < support_.size(); ++k)
        if (weights_[k] > 0.0) acc += weights_[k] * fn(support_[k]);
    return acc;
}

std::size_t ClaimLaw::sample_index(double uniform01) const {
    auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), uniform01);
    if (it == cumulative_.end()) return cumulative_.size() - 1;
    return static_cast<std::size_t>(it - cumulative_.begin());
}

}  // namespace runmax
