#include "runmax/lipschitz.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <sstream>

#include "runmax/errors.hpp"
#include "runmax/grid.hpp"

namespace runmax {

namespace {

double spectral_norm(const Eigen::MatrixXd& m) {
    if (m.size() == 0) return 0.0;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
    return svd.singularValues()(0);
}

}  // namespace

void LipschitzProfile::integrate(const ClaimLaw& claims) {
    int_g_bound4 = int_2g_g2 = int_1_plus_g_sq = int_1_4g_2g2 = 0.0;
    const auto& w = claims.weights();
    for (std::size_t k = 0; k < w.size(); ++k) {
        double b = g_bound[k];
        double l = g_lip[k];
        int_g_bound4 += w[k] * b * b * b * b;
        int_2g_g2 += w[k] * (2 * l + l * l);
        int_1_plus_g_sq += w[k] * (1 + l) * (1 + l);
        int_1_4g_2g2 += w[k] * (1 + 4 * l + 2 * l * l);
    }
}

LipschitzProfile LipschitzProfile::inflated(double factor, const ClaimLaw& claims) const {
    LipschitzProfile p = *this;
    p.f_bound *= factor;
    p.f_lip *= factor;
    for (auto& v : p.g_bound) v *= factor;
    for (auto& v : p.g_lip) v *= factor;
    p.jump_map_lip *= factor;
    p.integrate(claims);
    return p;
}

LipschitzProfile lipschitz_profile(const Dynamics& dyn, const std::vector<ControlPoint>& controls,
                                   const std::vector<std::vector<double>>& samples, double fd_step) {
    if (samples.empty()) throw ConfigError("lipschitz profile: empty sample set");
    if (controls.empty()) throw ConfigError("lipschitz profile: empty control set");
    const std::size_t d = dyn.dim();
    const auto& ys = dyn.claims().support();
    LipschitzProfile prof;
    prof.g_bound.assign(ys.size(), 0.0);
    prof.g_lip.assign(ys.size(), 0.0);
    prof.jump_map_lip = 0.0;

    std::vector<double> xp(d), xm(d), fp(d), fm(d), f0(d);
    Eigen::MatrixXd jf(d, d), jg(d, d);
    for (const auto& x : samples) {
        if (x.size() != d) throw ContractViolation("lipschitz profile: sample has wrong dimension");
        for (const auto& u : controls) {
            dyn.drift(x, u, f0);
            double nf = 0.0;
            for (double v : f0) nf += v * v;
            prof.f_bound = std::max(prof.f_bound, std::sqrt(nf));
            for (std::size_t c = 0; c < d; ++c) {
                xp = x;
                xm = x;
                xp[c] += fd_step;
                xm[c] -= fd_step;
                dyn.drift(xp, u, fp);
                dyn.drift(xm, u, fm);
                for (std::size_t r = 0; r < d; ++r) jf(r, c) = (fp[r] - fm[r]) / (2 * fd_step);
            }
            prof.f_lip = std::max(prof.f_lip, spectral_norm(jf));

            for (std::size_t k = 0; k < ys.size(); ++k) {
                dyn.jump(x, u, ys[k], f0);
                double ng = 0.0;
                for (double v : f0) ng += v * v;
                prof.g_bound[k] = std::max(prof.g_bound[k], std::sqrt(ng));
                for (std::size_t c = 0; c < d; ++c) {
                    xp = x;
                    xm = x;
                    xp[c] += fd_step;
                    xm[c] -= fd_step;
                    dyn.jump(xp, u, ys[k], fp);
                    dyn.jump(xm, u, ys[k], fm);
                    for (std::size_t r = 0; r < d; ++r) jg(r, c) = (fp[r] - fm[r]) / (2 * fd_step);
                }
                prof.g_lip[k] = std::max(prof.g_lip[k], spectral_norm(jg));
                if (d > 0) {
                    Eigen::MatrixXd post = jg + Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(d),
                                                                          static_cast<Eigen::Index>(d));
                    prof.jump_map_lip = std::max(prof.jump_map_lip, spectral_norm(post));
                }
            }
            ++prof.samples;
        }
    }
    if (d == 0) prof.jump_map_lip = 0.0;
    prof.integrate(dyn.claims());
    return prof;
}

LipschitzProfile sir_lipschitz_profile(const SirModel& model, std::size_t u_levels, std::size_t si_side,
                                       std::size_t x_nodes) {
    const auto& tr = model.params.truncation;
    if (!(tr.x_lo < tr.x_hi)) throw ConfigError("lipschitz profile: empty truncation box");
    Dynamics dyn = Dynamics::sir(model);
    StateGrid grid = StateGrid::sir(model.params.n, si_side, x_nodes, tr);
    std::vector<std::vector<double>> samples(grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k) samples[k] = grid.node(k);
    return lipschitz_profile(dyn, control_grid(model.params, u_levels), samples);
}

DiscountCheck check_discount(double h, double lambda, const LipschitzProfile& profile, const ClaimLaw& claims,
                             bool strict) {
    LipschitzProfile p = strict ? profile.inflated(1.1, claims) : profile;
    DiscountCheck out;
    out.h = h;
    out.moment_bound = 1.0 + (3.0 * p.f_lip + lambda * p.int_1_4g_2g2) / 4.0;
    out.lipschitz_bound = 2.0 * p.f_lip + lambda;
    out.required = std::max(out.moment_bound, out.lipschitz_bound);
    out.ok = h >= out.required;
    if (!out.ok) {
        std::ostringstream os;
        os << "discount rate h=" << h << " is below the required " << out.required << " (moment bound "
           << out.moment_bound << ", Lipschitz bound " << out.lipschitz_bound << ")";
        out.message = os.str();
        if (strict) throw ConfigError(out.message);
    }
    return out;
}

}  // namespace runmax
