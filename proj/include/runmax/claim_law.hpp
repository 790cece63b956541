#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace runmax {

/**
 * Finite discrete claim-size law: support points y_k >= 0 with weights w_k.
 *
 * Every "almost surely" statement about claims reduces to a max over the
 * support, and every claim integral is an exact finite sum.
 */
class ClaimLaw {
public:
    ClaimLaw(std::vector<double> support, std::vector<double> weights);

    /// Point mass at y.
    static ClaimLaw dirac(double y);

    /// Equal-mass quantization of a continuous law given by its quantile
    /// function; point k sits at the midpoint quantile (k + 1/2) / points.
    static ClaimLaw quantize(const std::function<double(double)>& quantile,
                             std::size_t points = 32);

    const std::vector<double>& support() const { return support_; }
    const std::vector<double>& weights() const { return weights_; }
    std::size_t size() const { return support_.size(); }

    double mean() const { return mean_; }
    double moment4() const { return moment4_; }
    double max_support() const;

    /// Exact expectation of fn(C1).
    double expect(const std::function<double(double)>& fn) const;

    /// Index drawn from a uniform variate in [0, 1).
    std::size_t sample_index(double uniform01) const;

private:
    std::vector<double> support_;
    std::vector<double> weights_;
    std::vector<double> cumulative_;
    double mean_ = 0.0;
    double moment4_ = 0.0;
};

}  // namespace runmax
