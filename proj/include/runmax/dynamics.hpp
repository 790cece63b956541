#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "runmax/claim_law.hpp"
#include "runmax/model.hpp"

namespace runmax {

/**
 * Generic controlled jump dynamics
 *
 *   dX = f(X, u) dt + g(X-, u, y) N(dt, dy),   N with intensity lambda P_C1(dy),
 *
 * on a flat state vector of dimension dim(). The discount coordinate a
 * (da = -h a dt) is never stored here; solvers handle it themselves.
 */
class Dynamics {
public:
    using DriftFn = std::function<void(std::span<const double>, const ControlPoint&, std::span<double>)>;
    using JumpFn =
        std::function<void(std::span<const double>, const ControlPoint&, double, std::span<double>)>;

    Dynamics(std::size_t dim, DriftFn drift, JumpFn jump, ClaimLaw claims, double lambda, double h,
             std::string name = "generic");

    /// Drift with every coordinate identically zero and no jumps.
    static Dynamics frozen(std::size_t dim, ClaimLaw claims, double lambda, double h);
    /// Zero-dimensional state: only the discount coordinate moves.
    static Dynamics pure_discount(double h);
    /// The firewalled SIR network with capital, truncated in x.
    static Dynamics sir(const SirModel& model);
    /// f(x, u) = -kappa x + u (1, ..., 1), g(x, u, y) = -theta min(y, 1) x.
    /// With 0 <= theta <= 1 every post-jump map is non-expansive.
    static Dynamics linear_contraction(std::size_t dim, double kappa, double theta, ClaimLaw claims,
                                       double lambda, double h);

    void drift(std::span<const double> x, const ControlPoint& u, std::span<double> out) const;
    /// Jump increment g(x, u, y); the post-jump state is x + g.
    void jump(std::span<const double> x, const ControlPoint& u, double y, std::span<double> out) const;

    std::vector<double> drift(std::span<const double> x, const ControlPoint& u) const;
    std::vector<double> jump(std::span<const double> x, const ControlPoint& u, double y) const;

    std::size_t dim() const { return dim_; }
    double lambda() const { return lambda_; }
    double h() const { return h_; }
    const ClaimLaw& claims() const { return claims_; }
    const std::string& name() const { return name_; }

    /// Edge count when built from a SIR model, 0 otherwise.
    std::size_t sir_edges() const { return sir_edges_; }
    /// Underlying SIR model, when there is one.
    const SirModel* sir_model() const { return sir_model_.get(); }

    /// Copy with a different discount rate.
    Dynamics with_h(double h) const;

private:
    std::size_t dim_;
    DriftFn drift_;
    JumpFn jump_;
    ClaimLaw claims_;
    double lambda_;
    double h_;
    std::string name_;
    std::size_t sir_edges_ = 0;
    std::shared_ptr<const SirModel> sir_model_;
};

}  // namespace runmax
