#pragma once

#include <pcac/common.hpp>

#include <algorithm>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace pcac {

/**
 * Dense strictly convex QP
 *
 *   minimize   ½ xᵀ H x + gᵀ x + constant
 *   subject to A x ≤ b
 *
 * `feasible_point` must satisfy the constraints; the solver starts there
 * unless a feasible warm start is supplied. Optionally the objective can
 * also be given as ½‖Mx + c‖² + const (`hessian_root` M, `root_offset` c,
 * with H = MᵀM and g = Mᵀc); the solver then works on M directly, which
 * keeps badly scaled problems solvable.
 */
struct QpProblem {
    Matrix hessian;
    Matrix hessian_root;
    Vector root_offset;
    Vector linear;
    double constant = 0.0;
    Matrix constraints;
    Vector bounds;
    Vector feasible_point;

    Eigen::Index variables() const { return hessian.rows(); }
    Eigen::Index rows() const { return constraints.rows(); }

    bool has_root() const { return hessian_root.size() > 0; }

    Vector hessian_times(const Vector& x) const
    {
        return has_root() ? Vector(hessian_root.transpose() * (hessian_root * x)) : Vector(hessian * x);
    }

    double objective(const Vector& x) const
    {
        const double quad = has_root() ? (hessian_root * x).squaredNorm() : x.dot(hessian * x);
        return 0.5 * quad + linear.dot(x) + constant;
    }

    /// Largest constraint violation, 0 when feasible.
    double max_violation(const Vector& x) const
    {
        if (rows() == 0) {
            return 0.0;
        }
        return std::max(0.0, (constraints * x - bounds).maxCoeff());
    }
};

/// Scaled KKT residuals; each is dimensionless.
struct KktResiduals {
    double stationarity = 0.0;
    double primal = 0.0;
    double dual = 0.0;
    double complementarity = 0.0;

    double max() const { return std::max({stationarity, primal, dual, complementarity}); }
};

struct QpSolution {
    Vector x;
    Vector multipliers; // one per constraint row, zero off the active set
    std::vector<int> active;
    int iterations = 0;
    double objective = 0.0;
    KktResiduals residuals;
};

/// The solver could not certify a solution; `residuals` describes the last iterate.
class QpFailure : public NumericalError {
public:
    QpFailure(const std::string& what, const KktResiduals& residuals)
        : NumericalError(what + " (stationarity " + std::to_string(residuals.stationarity) + ", primal " +
                         std::to_string(residuals.primal) + ", dual " + std::to_string(residuals.dual) +
                         ", complementarity " + std::to_string(residuals.complementarity) + ")"),
          residuals_(residuals)
    {
    }

    const KktResiduals& residuals() const { return residuals_; }

private:
    KktResiduals residuals_;
};

struct QpOptions {
    int max_iterations = 0; // 0 selects 10·(variables + constraints)
    double tolerance = 1e-8;
};

/**
 * KKT residuals of (x, λ) for `qp`. Stationarity is ‖Hx + g + Aᵀλ‖∞ over the
 * largest of its terms; primal and complementarity are measured against
 * max(1, |b_i|); dual feasibility against max(1, ‖λ‖∞).
 */
inline KktResiduals kkt_residuals(const QpProblem& qp, const Vector& x, const Vector& lambda)
{
    KktResiduals r;
    const Vector hx = qp.hessian_times(x);
    Vector at_lambda = Vector::Zero(x.size());
    if (qp.rows() > 0) {
        at_lambda = qp.constraints.transpose() * lambda;
    }
    const Vector grad = hx + qp.linear + at_lambda;
    const double scale = std::max({1.0, hx.lpNorm<Eigen::Infinity>(), qp.linear.lpNorm<Eigen::Infinity>(),
                                   at_lambda.lpNorm<Eigen::Infinity>()});
    r.stationarity = grad.lpNorm<Eigen::Infinity>() / scale;
    if (qp.rows() > 0) {
        const Vector slack = qp.bounds - qp.constraints * x;
        const double lambda_scale = std::max(1.0, lambda.lpNorm<Eigen::Infinity>());
        for (Eigen::Index i = 0; i < qp.rows(); ++i) {
            const double row_scale = std::max(1.0, std::abs(qp.bounds(i)));
            r.primal = std::max(r.primal, -slack(i) / row_scale);
            r.dual = std::max(r.dual, -lambda(i) / lambda_scale);
            r.complementarity =
                std::max(r.complementarity, std::abs(lambda(i) * slack(i)) / (lambda_scale * row_scale));
        }
    }
    return r;
}

namespace detail {

// Equality-constrained subproblem on a working set in least-squares form:
//   minimize ½‖Mx + c‖²  subject to  A_W x = b_W,
// solved on the null space of A_W so the conditioning of H = MᵀM is never squared.
class WorkingSetSolver {
public:
    explicit WorkingSetSolver(const QpProblem& qp) : qp_(qp)
    {
        const Eigen::Index n = qp.variables();
        if (qp.has_root()) {
            if (qp.hessian_root.cols() != n || qp.hessian_root.rows() < n) {
                throw DimensionError("solve_qp: Hessian root must have at least as many rows as variables");
            }
            detail::require_size(qp.root_offset.size(), qp.hessian_root.rows(), "solve_qp (root offset)");
            m_ = qp.hessian_root;
            c_ = qp.root_offset;
        } else {
            const Eigen::LLT<Matrix> llt(qp.hessian);
            if (llt.info() != Eigen::Success) {
                throw NumericalError("solve_qp: Hessian is not positive definite");
            }
            m_ = llt.matrixU();
            c_ = llt.matrixL().solve(qp.linear);
        }
        // No column pivoting: columns of M can differ by many orders of magnitude
        // without the problem being singular, and plain Householder QR is
        // insensitive to column scaling.
        const Eigen::HouseholderQR<Matrix> qr(m_);
        const auto diag = qr.matrixQR().diagonal().head(n);
        if (!diag.allFinite() || (diag.array() == 0.0).any()) {
            throw NumericalError("solve_qp: Hessian is singular");
        }
        unconstrained_ = qr.solve(-c_);
    }

    // Returns the minimizer on {A_W x = b_W} and fills `lambda_w`.
    Vector solve(const std::vector<int>& working, Vector& lambda_w) const
    {
        const Eigen::Index n = qp_.variables();
        const auto k = static_cast<Eigen::Index>(working.size());
        lambda_w.resize(k);
        if (k == 0) {
            return unconstrained_;
        }
        Matrix awt(n, k);
        Vector bw(k);
        for (Eigen::Index i = 0; i < k; ++i) {
            awt.col(i) = qp_.constraints.row(working[static_cast<std::size_t>(i)]).transpose();
            bw(i) = qp_.bounds(working[static_cast<std::size_t>(i)]);
        }
        const Eigen::HouseholderQR<Matrix> qa(awt);
        const Matrix q = qa.householderQ();
        const Matrix r = qa.matrixQR().topRows(k).triangularView<Eigen::Upper>();
        if ((r.diagonal().cwiseAbs().array() <= 1e-12 * r.diagonal().cwiseAbs().maxCoeff()).any()) {
            throw NumericalError("solve_qp: working set is linearly dependent");
        }
        Vector x = q.leftCols(k) * r.transpose().triangularView<Eigen::Lower>().solve(bw);
        if (k < n) {
            const auto z = q.rightCols(n - k);
            const Matrix mz = m_ * z;
            x += z * Eigen::HouseholderQR<Matrix>(mz).solve(-(m_ * x + c_));
        }
        const Vector grad = m_.transpose() * (m_ * x + c_);
        lambda_w = r.triangularView<Eigen::Upper>().solve(-(q.leftCols(k).transpose() * grad));
        return x;
    }

private:
    const QpProblem& qp_;
    Matrix m_;
    Vector c_;
    Vector unconstrained_;
};

} // namespace detail

/**
 * Primal active-set method for dense strictly convex QPs.
 *
 * Starts from a feasible point (the warm start when feasible, otherwise
 * `qp.feasible_point`) with an empty working set. Blocking constraints are
 * added one at a time and the most negative multiplier is dropped; ties go
 * to the smallest constraint index, so runs are deterministic.
 */
inline QpSolution solve_qp(const QpProblem& qp, const QpOptions& options = {},
                           const std::optional<Vector>& warm_start = std::nullopt)
{
    const Eigen::Index n = qp.variables();
    detail::require_shape(qp.hessian, n, n, "solve_qp (hessian)");
    detail::require_size(qp.linear.size(), n, "solve_qp (linear term)");
    detail::require_size(qp.bounds.size(), qp.rows(), "solve_qp (bounds)");
    if (qp.rows() > 0) {
        detail::require_size(qp.constraints.cols(), n, "solve_qp (constraint columns)");
    }
    detail::require_size(qp.feasible_point.size(), n, "solve_qp (feasible point)");

    const double feas_tol = 1e-12;
    Vector x = qp.feasible_point;
    if (warm_start && warm_start->size() == n && warm_start->allFinite() &&
        qp.max_violation(*warm_start) <= feas_tol) {
        x = *warm_start;
    }
    if (qp.max_violation(x) > 1e-9) {
        throw NumericalError("solve_qp: starting point is infeasible (violation " +
                             std::to_string(qp.max_violation(x)) + ")");
    }

    const detail::WorkingSetSolver eqp(qp);
    const int max_iter = options.max_iterations > 0 ? options.max_iterations
                                                    : static_cast<int>(10 * (n + qp.rows()) + 10);
    std::vector<int> working;
    std::vector<char> in_working(static_cast<std::size_t>(qp.rows()), 0);
    Vector lambda_w;
    int stalled_add = -1; // constraint added by a zero-length step, if the last step was one

    const auto residuals_now = [&]() {
        Vector mult = Vector::Zero(qp.rows());
        for (std::size_t i = 0; i < working.size() && static_cast<Eigen::Index>(i) < lambda_w.size(); ++i) {
            mult(working[i]) = lambda_w(static_cast<Eigen::Index>(i));
        }
        return kkt_residuals(qp, x, mult);
    };

    QpSolution sol;
    for (int it = 1; it <= max_iter; ++it) {
        Vector target;
        try {
            target = eqp.solve(working, lambda_w);
        } catch (const NumericalError& e) {
            throw QpFailure(e.what(), residuals_now());
        }
        const Vector step = target - x;
        const double step_norm = step.lpNorm<Eigen::Infinity>();

        if (step_norm <= 1e-13 * std::max(1.0, x.lpNorm<Eigen::Infinity>())) {
            x = target;
            const double dual_tol =
                1e-12 * std::max(1.0, lambda_w.size() > 0 ? lambda_w.cwiseAbs().maxCoeff() : 0.0);
            Eigen::Index drop = -1;
            for (Eigen::Index i = 0; i < lambda_w.size(); ++i) {
                if (lambda_w(i) >= -dual_tol) {
                    continue;
                }
                const auto idx = static_cast<std::size_t>(i);
                const auto best = static_cast<std::size_t>(drop);
                if (drop < 0 || lambda_w(i) < lambda_w(drop) ||
                    (lambda_w(i) == lambda_w(drop) && working[idx] < working[best])) {
                    drop = i;
                }
            }
            if (drop < 0) {
                sol.iterations = it;
                break;
            }
            // Dropping what a zero-length step just added would revisit the same
            // working set: the subproblems are below working precision.
            if (working[static_cast<std::size_t>(drop)] == stalled_add) {
                throw QpFailure("solve_qp: active set cycling, problem numerically singular", residuals_now());
            }
            in_working[static_cast<std::size_t>(working[static_cast<std::size_t>(drop)])] = 0;
            working.erase(working.begin() + drop);
            continue;
        }

        double alpha = 1.0;
        int blocking = -1;
        for (Eigen::Index i = 0; i < qp.rows(); ++i) {
            if (in_working[static_cast<std::size_t>(i)]) {
                continue;
            }
            const auto row = qp.constraints.row(i);
            const double ap = row.dot(step);
            if (ap <= 1e-13 * step_norm * row.lpNorm<1>()) {
                continue;
            }
            const double room = std::max(0.0, qp.bounds(i) - row.dot(x));
            const double ratio = room / ap;
            if (ratio < alpha) {
                alpha = ratio;
                blocking = static_cast<int>(i);
            }
        }
        x += alpha * step;
        stalled_add = -1;
        if (blocking >= 0) {
            working.push_back(blocking);
            in_working[static_cast<std::size_t>(blocking)] = 1;
            if (alpha * step_norm <= 1e-13 * std::max(1.0, x.lpNorm<Eigen::Infinity>())) {
                stalled_add = blocking;
            }
        }
    }
    if (sol.iterations == 0) {
        throw QpFailure("solve_qp: iteration cap " + std::to_string(max_iter) + " reached", residuals_now());
    }

    sol.x = x;
    sol.multipliers = Vector::Zero(qp.rows());
    for (std::size_t i = 0; i < working.size(); ++i) {
        sol.multipliers(working[i]) = lambda_w(static_cast<Eigen::Index>(i));
    }
    sol.active = working;
    std::sort(sol.active.begin(), sol.active.end());
    sol.objective = qp.objective(x);
    sol.residuals = kkt_residuals(qp, sol.x, sol.multipliers);
    if (!sol.x.allFinite()) {
        throw NumericalError("solve_qp: non-finite solution");
    }
    if (sol.residuals.max() > options.tolerance) {
        throw QpFailure("solve_qp: KKT residuals above tolerance", sol.residuals);
    }
    return sol;
}

} // namespace pcac
