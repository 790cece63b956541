#include "runmax/simplex.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "runmax/errors.hpp"

namespace runmax {

std::string to_string(LpStatus s) {
    switch (s) {
        case LpStatus::Optimal: return "optimal";
        case LpStatus::Infeasible: return "infeasible";
        case LpStatus::IterationLimit: return "iteration-limit";
    }
    return "unknown";
}

void LinearProgram::add_column(double c, const std::vector<std::pair<std::uint32_t, double>>& entries) {
    std::map<std::uint32_t, double> merged;
    for (const auto& [r, v] : entries) {
        if (r >= rows) throw ContractViolation("linear program: column refers to a missing row");
        merged[r] += v;
    }
    for (const auto& [r, v] : merged) {
        if (v == 0.0) continue;
        row_index.push_back(r);
        value.push_back(v);
    }
    col_start.push_back(row_index.size());
    cost.push_back(c);
}

std::size_t LinearProgram::add_row(double b, RowSense s) {
    rhs.push_back(b);
    sense.push_back(s);
    return rows++;
}

namespace {

constexpr double kPivotTol = 1e-9;
constexpr double kPerturbation = 1e-7;

class RevisedSimplex {
public:
    RevisedSimplex(const LinearProgram& lp, const SimplexOptions& opts) : lp_(lp), opts_(opts), m_(lp.rows) {
        if (lp.rhs.size() != m_ || lp.sense.size() != m_) throw ContractViolation("linear program: row data mismatch");
        if (lp.col_start.size() != lp.cols() + 1) throw ContractViolation("linear program: column data mismatch");
        n_orig_ = lp.cols();
        equilibrate();
        b_ = Eigen::VectorXd(static_cast<Eigen::Index>(m_));
        for (std::size_t i = 0; i < m_; ++i) {
            double sgn = lp.rhs[i] < 0.0 ? -1.0 : 1.0;
            negated_.push_back(sgn < 0.0);
            row_scale_[i] *= sgn;
            b_[static_cast<Eigen::Index>(i)] = row_scale_[i] * lp.rhs[i];
        }
        // internal columns: scaled originals, slacks, artificials
        start_ = {0};
        for (std::size_t j = 0; j < n_orig_; ++j) {
            for (std::size_t k = lp.col_start[j]; k < lp.col_start[j + 1]; ++k) {
                rows_.push_back(lp.row_index[k]);
                vals_.push_back(row_scale_[lp.row_index[k]] * lp.value[k] * col_scale_[j]);
            }
            start_.push_back(rows_.size());
            kind_.push_back(Kind::Original);
        }
        basis_.assign(m_, 0);
        for (std::size_t i = 0; i < m_; ++i) {
            if (lp.sense[i] != RowSense::LessEqual) continue;
            std::size_t col = push_unit(i, negated_[i] ? -1.0 : 1.0, Kind::Slack);
            if (!negated_[i]) basis_[i] = col + 1;  // +1 marks "assigned"
        }
        for (std::size_t i = 0; i < m_; ++i) {
            if (basis_[i] != 0) continue;
            basis_[i] = push_unit(i, 1.0, Kind::Artificial) + 1;
        }
        for (auto& b : basis_) b -= 1;
        pos_.assign(kind_.size(), -1);
        for (std::size_t i = 0; i < m_; ++i) pos_[basis_[i]] = static_cast<long>(i);
        binv_ = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(m_), static_cast<Eigen::Index>(m_));
        xb_ = b_;
    }

    SimplexResult solve() {
        SimplexResult res;
        cost_.assign(kind_.size(), 0.0);
        for (std::size_t j = 0; j < kind_.size(); ++j)
            if (kind_[j] == Kind::Artificial) cost_[j] = 1.0;
        bool any_artificial = std::any_of(kind_.begin(), kind_.end(), [](Kind k) { return k == Kind::Artificial; });
        if (any_artificial) {
            if (!iterate(true, res)) return finish(res, LpStatus::IterationLimit);
            double infeas = 0.0;
            for (std::size_t i = 0; i < m_; ++i)
                if (kind_[basis_[i]] == Kind::Artificial) infeas += std::max(0.0, xb_[static_cast<Eigen::Index>(i)]);
            if (infeas > opts_.feas_tol * std::max(1.0, b_.cwiseAbs().maxCoeff())) return finish(res, LpStatus::Infeasible);
            drive_out_artificials();
        }
        for (std::size_t j = 0; j < kind_.size(); ++j) cost_[j] = j < n_orig_ ? lp_.cost[j] * col_scale_[j] : 0.0;
        if (!iterate(false, res)) return finish(res, LpStatus::IterationLimit);
        return finish(res, LpStatus::Optimal);
    }

private:
    enum class Kind { Original, Slack, Artificial };

    // Alternating row/column max-norm scaling; powers of two keep it exact.
    void equilibrate() {
        row_scale_.assign(m_, 1.0);
        col_scale_.assign(n_orig_, 1.0);
        auto pow2 = [](double v) { return std::exp2(std::round(std::log2(v))); };
        for (int pass = 0; pass < 3; ++pass) {
            std::vector<double> rmax(m_, 0.0);
            for (std::size_t j = 0; j < n_orig_; ++j)
                for (std::size_t k = lp_.col_start[j]; k < lp_.col_start[j + 1]; ++k) {
                    auto r = lp_.row_index[k];
                    rmax[r] = std::max(rmax[r], std::abs(lp_.value[k]) * col_scale_[j]);
                }
            for (std::size_t i = 0; i < m_; ++i)
                if (rmax[i] > 0.0) row_scale_[i] = pow2(1.0 / rmax[i]);
            for (std::size_t j = 0; j < n_orig_; ++j) {
                double cmax = 0.0;
                for (std::size_t k = lp_.col_start[j]; k < lp_.col_start[j + 1]; ++k)
                    cmax = std::max(cmax, std::abs(lp_.value[k]) * row_scale_[lp_.row_index[k]]);
                if (cmax > 0.0) col_scale_[j] = pow2(1.0 / cmax);
            }
        }
    }

    std::size_t push_unit(std::size_t row, double v, Kind k) {
        rows_.push_back(static_cast<std::uint32_t>(row));
        vals_.push_back(v);
        start_.push_back(rows_.size());
        kind_.push_back(k);
        return kind_.size() - 1;
    }

    double column_dot(std::size_t j, const Eigen::VectorXd& y) const {
        double acc = 0.0;
        for (std::size_t k = start_[j]; k < start_[j + 1]; ++k) acc += vals_[k] * y[rows_[k]];
        return acc;
    }

    void ftran(std::size_t j, Eigen::VectorXd& w) const {
        w.setZero(static_cast<Eigen::Index>(m_));
        for (std::size_t k = start_[j]; k < start_[j + 1]; ++k) w.noalias() += vals_[k] * binv_.col(rows_[k]);
    }

    void pivot(std::size_t r, std::size_t enter, const Eigen::VectorXd& w) {
        const auto er = static_cast<Eigen::Index>(r);
        double theta = std::max(xb_[er], 0.0) / w[er];
        xb_.noalias() -= theta * w;
        xb_[er] = theta;
        Eigen::RowVectorXd rowr = binv_.row(er) / w[er];
        Eigen::VectorXd wv = w;
        wv[er] -= 1.0;
        binv_.noalias() -= wv * rowr;
        pos_[basis_[r]] = -1;
        basis_[r] = enter;
        pos_[enter] = static_cast<long>(r);
        ++since_refactor_;
    }

    // Rebuilds the inverse; keeps the current (possibly perturbed) basic values unless asked.
    void refactor(bool reset_values) {
        const auto m = static_cast<Eigen::Index>(m_);
        Eigen::MatrixXd bmat = Eigen::MatrixXd::Zero(m, m);
        for (std::size_t i = 0; i < m_; ++i) {
            std::size_t j = basis_[i];
            for (std::size_t k = start_[j]; k < start_[j + 1]; ++k)
                bmat(rows_[k], static_cast<Eigen::Index>(i)) = vals_[k];
        }
        Eigen::PartialPivLU<Eigen::MatrixXd> lu(bmat);
        binv_ = lu.inverse();
        if (!binv_.allFinite()) throw NonConvergence("simplex basis became singular", 0.0);
        Eigen::VectorXd exact = binv_ * b_;
        if (reset_values || !perturbed_) {
            xb_ = exact;
        } else {
            xb_ = exact + shift_;
        }
        since_refactor_ = 0;
    }

    // Lifts every basic value by a small distinct amount to break degeneracy.
    void perturb() {
        const auto m = static_cast<Eigen::Index>(m_);
        if (!perturbed_) shift_ = Eigen::VectorXd::Zero(m);
        for (Eigen::Index i = 0; i < m; ++i) {
            double d = kPerturbation * (1.0 + static_cast<double>((static_cast<std::size_t>(i) * 7919u) % 997u) / 997.0);
            shift_[i] += d;
            xb_[i] += d;
        }
        perturbed_ = true;
    }

    // Drops the perturbation; tiny negative basics are rounded to zero.
    void unperturb() {
        if (!perturbed_) return;
        perturbed_ = false;
        refactor(true);
        for (Eigen::Index i = 0; i < xb_.size(); ++i)
            if (xb_[i] < 0.0 && xb_[i] > -1e3 * kPerturbation) xb_[i] = 0.0;
    }

    // Returns false on iteration limit.
    bool iterate(bool phase1, SimplexResult& res) {
        const auto m = static_cast<Eigen::Index>(m_);
        Eigen::VectorXd cb(m), pi(m), w(m);
        std::size_t degenerate = 0;
        while (true) {
            if (res.iterations >= opts_.max_iters) return false;
            if (since_refactor_ >= 100) refactor(false);
            for (Eigen::Index i = 0; i < m; ++i) cb[i] = cost_[basis_[static_cast<std::size_t>(i)]];
            pi.noalias() = binv_.transpose() * cb;

            std::size_t enter = kind_.size();
            double best = -opts_.opt_tol;
            for (std::size_t j = 0; j < kind_.size(); ++j) {
                if (pos_[j] >= 0) continue;
                if (!phase1 && kind_[j] == Kind::Artificial) continue;
                double d = cost_[j] - column_dot(j, pi);
                if (d < best) {
                    best = d;
                    enter = j;
                }
            }
            if (enter == kind_.size()) {
                if (since_refactor_ > 0 || perturbed_) {
                    // confirm on a fresh factorization of the unperturbed problem
                    unperturb();
                    refactor(true);
                    for (Eigen::Index i = 0; i < m; ++i) cb[i] = cost_[basis_[static_cast<std::size_t>(i)]];
                    pi.noalias() = binv_.transpose() * cb;
                    bool improving = false;
                    for (std::size_t j = 0; j < kind_.size() && !improving; ++j) {
                        if (pos_[j] >= 0 || (!phase1 && kind_[j] == Kind::Artificial)) continue;
                        improving = cost_[j] - column_dot(j, pi) < -opts_.opt_tol;
                    }
                    if (improving) continue;
                }
                return true;
            }

            ftran(enter, w);
            const double piv_tol = kPivotTol * std::max(1.0, w.cwiseAbs().maxCoeff());
            // Harris: relax the ratio bound by feas_tol, then take the largest pivot under it
            double bound = std::numeric_limits<double>::infinity();
            for (Eigen::Index i = 0; i < m; ++i)
                if (w[i] > piv_tol) bound = std::min(bound, (std::max(xb_[i], 0.0) + opts_.feas_tol) / w[i]);
            std::size_t leave = m_;
            for (Eigen::Index i = 0; i < m; ++i) {
                if (w[i] <= piv_tol || std::max(xb_[i], 0.0) / w[i] > bound) continue;
                if (leave == m_ || w[i] > w[static_cast<Eigen::Index>(leave)]) leave = static_cast<std::size_t>(i);
            }
            if (leave == m_) throw ContractViolation("linear program is unbounded below");
            double theta = std::max(xb_[static_cast<Eigen::Index>(leave)], 0.0) / w[static_cast<Eigen::Index>(leave)];
            if (theta <= 1e-12) {
                if (++degenerate > opts_.stall_limit) {
                    perturb();
                    res.perturbed = true;
                    degenerate = 0;
                }
            } else {
                degenerate = 0;
            }
            pivot(leave, enter, w);
            for (Eigen::Index i = 0; i < m; ++i)
                if (xb_[i] < 0.0 && xb_[i] > -opts_.feas_tol) xb_[i] = 0.0;
            ++res.iterations;
        }
    }

    void drive_out_artificials() {
        const auto m = static_cast<Eigen::Index>(m_);
        Eigen::VectorXd w(m);
        for (std::size_t r = 0; r < m_; ++r) {
            if (kind_[basis_[r]] != Kind::Artificial) continue;
            Eigen::VectorXd rho = binv_.row(static_cast<Eigen::Index>(r)).transpose();
            std::size_t best = kind_.size();
            double mag = 1e-7;
            for (std::size_t j = 0; j < kind_.size(); ++j) {
                if (pos_[j] >= 0 || kind_[j] == Kind::Artificial) continue;
                double v = std::abs(column_dot(j, rho));
                if (v > mag) {
                    mag = v;
                    best = j;
                }
            }
            // no candidate: the row is redundant and the artificial stays basic at zero
            if (best == kind_.size()) continue;
            ftran(best, w);
            pivot(r, best, w);
        }
        refactor(true);
        for (Eigen::Index i = 0; i < m; ++i)
            if (xb_[i] < 0.0) xb_[i] = 0.0;
    }

    SimplexResult& finish(SimplexResult& res, LpStatus status) {
        res.status = status;
        const auto m = static_cast<Eigen::Index>(m_);
        std::vector<double> xfull(kind_.size(), 0.0);
        for (std::size_t i = 0; i < m_; ++i) xfull[basis_[i]] = xb_[static_cast<Eigen::Index>(i)];
        // Harris steps leave basics slightly negative; an optimal point is reported on x >= 0.
        if (status == LpStatus::Optimal)
            for (double& v : xfull)
                if (v < 0.0 && v > -1e3 * kPerturbation) v = 0.0;
        res.x.resize(n_orig_);
        for (std::size_t j = 0; j < n_orig_; ++j) res.x[j] = xfull[j] * col_scale_[j];
        res.objective = 0.0;
        for (std::size_t j = 0; j < n_orig_; ++j) res.objective += lp_.cost[j] * res.x[j];

        Eigen::VectorXd cb(m);
        for (Eigen::Index i = 0; i < m; ++i) {
            std::size_t j = basis_[static_cast<std::size_t>(i)];
            cb[i] = j < n_orig_ ? lp_.cost[j] * col_scale_[j] : 0.0;
        }
        Eigen::VectorXd pi = binv_.transpose() * cb;
        res.duals.resize(m_);
        for (std::size_t i = 0; i < m_; ++i) res.duals[i] = row_scale_[i] * pi[static_cast<Eigen::Index>(i)];

        std::vector<double> ax(m_, 0.0);
        res.dual_violation = 0.0;
        res.complementarity = 0.0;
        res.primal_residual = 0.0;
        for (std::size_t j = 0; j < n_orig_; ++j) {
            double dot = 0.0;
            for (std::size_t k = lp_.col_start[j]; k < lp_.col_start[j + 1]; ++k) {
                ax[lp_.row_index[k]] += lp_.value[k] * res.x[j];
                dot += lp_.value[k] * res.duals[lp_.row_index[k]];
            }
            double d = lp_.cost[j] - dot;
            res.dual_violation = std::max(res.dual_violation, -d);
            res.complementarity = std::max(res.complementarity, res.x[j] * std::abs(d));
            res.primal_residual = std::max(res.primal_residual, -res.x[j]);
        }
        for (std::size_t i = 0; i < m_; ++i) {
            double r = ax[i] - lp_.rhs[i];
            if (lp_.sense[i] == RowSense::LessEqual) {
                res.primal_residual = std::max(res.primal_residual, r);
                res.dual_violation = std::max(res.dual_violation, res.duals[i]);
            } else {
                res.primal_residual = std::max(res.primal_residual, std::abs(r));
            }
        }
        if (!std::isfinite(res.objective) || !std::isfinite(res.primal_residual))
            throw NonConvergence("simplex produced non-finite values", res.primal_residual);
        return res;
    }

    const LinearProgram& lp_;
    SimplexOptions opts_;
    std::size_t m_;
    std::size_t n_orig_ = 0;
    std::vector<double> row_scale_;
    std::vector<double> col_scale_;
    std::vector<bool> negated_;
    Eigen::VectorXd b_;
    std::vector<std::size_t> start_;
    std::vector<std::uint32_t> rows_;
    std::vector<double> vals_;
    std::vector<Kind> kind_;
    std::vector<double> cost_;
    std::vector<std::size_t> basis_;
    std::vector<long> pos_;
    Eigen::MatrixXd binv_;
    Eigen::VectorXd xb_;
    Eigen::VectorXd shift_;
    bool perturbed_ = false;
    std::size_t since_refactor_ = 0;
};

}  // namespace

SimplexResult solve_simplex(const LinearProgram& lp, const SimplexOptions& opts) {
    if (lp.rows == 0) throw ContractViolation("linear program has no rows");
    RevisedSimplex s(lp, opts);
    return s.solve();
}

}  // namespace runmax
