#pragma once

#include <pcac/bocf.hpp>
#include <pcac/common.hpp>
#include <pcac/qp.hpp>
#include <pcac/saturation.hpp>

#include <cmath>

namespace pcac {

/**
 * ℓ-step prediction Y = Γ x₁ + T U.
 *
 * Γ stacks C Aⁱ⁻¹; T is block-Toeplitz with H_i = C Aⁱ⁻¹ B on the i-th block
 * subdiagonal and a zero first block row.
 */
struct PredictionMatrices {
    int horizon = 1;
    Matrix gamma;     // ℓp × n̂p
    Matrix toeplitz;  // ℓp × ℓm
    std::vector<Matrix> markov; // H_1 .. H_{ℓ-1}

    Vector predict(const Vector& x1, const Vector& controls) const { return gamma * x1 + toeplitz * controls; }
};

inline PredictionMatrices build_prediction(const BocfRealization& r, int horizon)
{
    if (horizon < 1) {
        throw ConfigError("build_prediction: horizon must be >= 1");
    }
    const Eigen::Index p = r.C.rows();
    const Eigen::Index m = r.B.cols();
    const Eigen::Index nx = r.A.rows();
    const Eigen::Index l = horizon;

    PredictionMatrices pm;
    pm.horizon = horizon;
    pm.gamma.resize(l * p, nx);
    pm.toeplitz = Matrix::Zero(l * p, l * m);

    Matrix c_pow = r.C; // C Aⁱ⁻¹
    for (Eigen::Index i = 0; i < l; ++i) {
        pm.gamma.middleRows(i * p, p) = c_pow;
        if (i + 1 < l) {
            pm.markov.push_back(c_pow * r.B);
        }
        c_pow = (c_pow * r.A).eval();
    }
    for (Eigen::Index i = 1; i < l; ++i) {
        for (Eigen::Index j = 0; j < i; ++j) {
            pm.toeplitz.block(i * p, j * m, p, m) = pm.markov[static_cast<std::size_t>(i - j - 1)];
        }
    }
    return pm;
}

/**
 * Output and move-size weights. The stacked output weight is
 * Q = blockdiag(Q̄, P̄) with Q̄ the (ℓ-1)p_t cost-to-go block and P̄ the
 * terminal block; `command_output` is C_t (p_t × p).
 */
struct MpcWeights {
    Matrix q_bar;
    Matrix p_bar;
    Matrix r;
    Matrix command_output;

    static MpcWeights diagonal(int horizon, const Vector& q_diag, const Vector& p_diag, const Vector& r_diag,
                               const Matrix& command_output)
    {
        const Eigen::Index pt = command_output.rows();
        detail::require_size(q_diag.size(), pt, "MpcWeights::diagonal (q)");
        detail::require_size(p_diag.size(), pt, "MpcWeights::diagonal (p)");
        MpcWeights w;
        w.q_bar = q_diag.replicate(horizon - 1, 1).asDiagonal();
        w.p_bar = p_diag.asDiagonal();
        w.r = r_diag.replicate(horizon, 1).asDiagonal();
        w.command_output = command_output;
        return w;
    }

    Matrix output_weight() const
    {
        const Eigen::Index nq = q_bar.rows();
        const Eigen::Index np = p_bar.rows();
        Matrix q = Matrix::Zero(nq + np, nq + np);
        q.topLeftCorner(nq, nq) = q_bar;
        q.bottomRightCorner(np, np) = p_bar;
        return q;
    }

    void validate(int horizon, Eigen::Index outputs, Eigen::Index inputs) const
    {
        const Eigen::Index pt = command_output.rows();
        detail::require_shape(command_output, pt, outputs, "MpcWeights.command_output");
        detail::require_shape(q_bar, (horizon - 1) * pt, (horizon - 1) * pt, "MpcWeights.q_bar");
        detail::require_shape(p_bar, pt, pt, "MpcWeights.p_bar");
        detail::require_shape(r, horizon * inputs, horizon * inputs, "MpcWeights.r");
        if (horizon > 1 && !detail::is_positive_definite(q_bar)) {
            throw ConfigError("MpcWeights: cost-to-go weight is not positive definite");
        }
        if (!detail::is_positive_definite(p_bar)) {
            throw ConfigError("MpcWeights: terminal weight is not positive definite");
        }
        if (!detail::is_positive_definite(r)) {
            throw ConfigError("MpcWeights: move-size weight is not positive definite");
        }
    }
};

namespace detail {

/// Symmetric square root of a positive semidefinite matrix; tiny negative eigenvalues clip to zero.
inline Matrix psd_sqrt(const Matrix& m)
{
    if (m.isDiagonal(0.0)) {
        return m.diagonal().cwiseMax(0.0).cwiseSqrt().asDiagonal();
    }
    const Eigen::SelfAdjointEigenSolver<Matrix> es(m);
    return es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() *
           es.eigenvectors().transpose();
}

} // namespace detail

/// Receding-horizon QP in the stacked controls U, plus the data needed to read it back.
struct MpcProblem {
    QpProblem qp;
    Vector last_control;
    int horizon = 1;
    Eigen::Index inputs = 1;
};

/**
 * Expands
 *   (C_{t,ℓ}(Γx₁ + TU) - R)ᵀ Q (·) + (DU - d)ᵀ R_w (DU - d)
 * into ½UᵀHU + gᵀU + c, with D the block lower-bidiagonal difference map and
 * d = [u_k; 0; ...]. Constraints are the replicated magnitude box on U and
 * move-size box on DU - d.
 */
inline MpcProblem assemble_qp(const PredictionMatrices& pm, const Vector& x1, const Vector& commands,
                              const MpcWeights& w, const SaturationLimits& lim, const Vector& last_control)
{
    const int l = pm.horizon;
    const Eigen::Index m = lim.channels();
    const Eigen::Index p = pm.gamma.rows() / l;
    const Eigen::Index pt = w.command_output.rows();
    lim.validate();
    detail::require_size(last_control.size(), m, "assemble_qp (last control)");
    detail::require_size(x1.size(), pm.gamma.cols(), "assemble_qp (x1)");
    detail::require_size(commands.size(), l * pt, "assemble_qp (commands)");
    detail::require_shape(pm.toeplitz, l * p, l * m, "assemble_qp (toeplitz)");
    w.validate(l, p, m);

    const Eigen::Index nu = l * m;
    Matrix ct_stack = Matrix::Zero(l * pt, l * p);
    for (Eigen::Index i = 0; i < l; ++i) {
        ct_stack.block(i * pt, i * p, pt, p) = w.command_output;
    }
    const Matrix e = ct_stack * pm.toeplitz;
    const Vector f = ct_stack * (pm.gamma * x1) - commands;
    const Matrix q = w.output_weight();

    Matrix d = Matrix::Identity(nu, nu);
    for (Eigen::Index i = 1; i < l; ++i) {
        d.block(i * m, (i - 1) * m, m, m) = -Matrix::Identity(m, m);
    }
    Vector d_offset = Vector::Zero(nu);
    d_offset.head(m) = last_control;

    MpcProblem out;
    out.horizon = l;
    out.inputs = m;
    out.last_control = last_control;

    auto& qp = out.qp;
    const Matrix qe = q * e;
    const Matrix rd = w.r * d;
    qp.hessian = 2.0 * (e.transpose() * qe + d.transpose() * rd);
    qp.hessian = 0.5 * (qp.hessian + qp.hessian.transpose()).eval();
    const Matrix q_half = std::sqrt(2.0) * detail::psd_sqrt(q);
    const Matrix r_half = std::sqrt(2.0) * detail::psd_sqrt(w.r);
    qp.hessian_root.resize(e.rows() + nu, nu);
    qp.hessian_root << q_half * e, r_half * d;
    qp.root_offset.resize(e.rows() + nu);
    qp.root_offset << q_half * f, -(r_half * d_offset);
    qp.linear = 2.0 * (qe.transpose() * f - rd.transpose() * d_offset);
    qp.constant = f.dot(q * f) + d_offset.dot(w.r * d_offset);

    qp.constraints.resize(4 * nu, nu);
    qp.constraints << Matrix::Identity(nu, nu), -Matrix::Identity(nu, nu), d, -d;
    qp.bounds.resize(4 * nu);
    qp.bounds << lim.u_max.replicate(l, 1), -lim.u_min.replicate(l, 1), lim.du_max.replicate(l, 1) + d_offset,
        -(lim.du_min.replicate(l, 1) + d_offset);
    qp.feasible_point = last_control.replicate(l, 1);
    return out;
}

/// Solve, warm-starting from a previous stacked solution when feasible.
inline QpSolution solve_mpc(const MpcProblem& problem, const std::optional<Vector>& warm_start = std::nullopt,
                            const QpOptions& options = {})
{
    return solve_qp(problem.qp, options, warm_start);
}

/// u_{k|1}: the first m components of the optimizer.
inline Vector first_control(const QpSolution& sol, Eigen::Index inputs)
{
    if (sol.x.size() < inputs) {
        throw DimensionError("first_control: solution shorter than the control dimension");
    }
    return sol.x.head(inputs);
}

/// Drop the first control and repeat the last: the receding-horizon warm start.
inline Vector shift_controls(const Vector& controls, Eigen::Index inputs)
{
    const Eigen::Index n = controls.size();
    Vector out(n);
    out.head(n - inputs) = controls.tail(n - inputs);
    out.tail(inputs) = controls.tail(inputs);
    return out;
}

} // namespace pcac
