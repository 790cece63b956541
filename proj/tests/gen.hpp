#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "runmax/model.hpp"

namespace testgen {

// Hand-rolled generators for property tests; fixed seeds keep failures reproducible.
class Gen {
public:
    explicit Gen(std::uint64_t seed) : rng_(seed) {}

    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
    std::size_t index(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng_); }

    /// Point of the (s, i) triangle, with some mass on the edges and corners.
    std::pair<double, double> triangle_point() {
        switch (index(8)) {
            case 0: return {0.0, uniform(0.0, 1.0)};
            case 1: { double i = uniform(0.0, 1.0); return {1.0 - i, i}; }
            case 2: return {uniform(0.0, 1.0), 0.0};
            default: {
                double a = uniform(0.0, 1.0), b = uniform(0.0, 1.0);
                if (a + b > 1.0) { a = 1.0 - a; b = 1.0 - b; }
                return {a, b};
            }
        }
    }

    runmax::NetworkState state(std::size_t n, double x_lo = -5.0, double x_hi = 5.0) {
        runmax::NetworkState st;
        for (std::size_t j = 0; j < n; ++j) {
            auto [s, i] = triangle_point();
            st.s.push_back(s);
            st.i.push_back(i);
        }
        st.x = uniform(x_lo, x_hi);
        return st;
    }

    std::vector<double> protection(std::size_t n) {
        std::vector<double> p;
        for (std::size_t j = 0; j < n; ++j) p.push_back(index(4) == 0 ? 1.0 : uniform(1.0, 10.0));
        return p;
    }

    std::mt19937_64& engine() { return rng_; }

private:
    std::mt19937_64 rng_;
};

inline runmax::SirParams sir_params(std::vector<double> beta, std::vector<double> gamma,
                                    std::vector<std::vector<double>> levels, double lambda = 0.5, double h = 1.0) {
    runmax::SirParams p;
    p.n = beta.size();
    p.beta = std::move(beta);
    p.gamma = std::move(gamma);
    p.prev_levels = std::move(levels);
    p.lambda = lambda;
    p.h = h;
    return p;
}

}  // namespace testgen
