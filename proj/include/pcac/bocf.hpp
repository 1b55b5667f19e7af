#pragma once

#include <pcac/common.hpp>
#include <pcac/rls_vrf.hpp>

#include <utility>

namespace pcac {

/// Block observable canonical form (A, B, C) of an identified ARX model.
struct BocfRealization {
    ArxDims dims;
    Matrix A; // n̂p × n̂p
    Matrix B; // n̂p × m
    Matrix C; // p × n̂p
};

/// Model state x = [x(1); ...; x(n̂)], blocks of length p; x(1) is the current output.
struct BocfState {
    Vector x;
};

/// F_i block (p × p), i = 1..n̂, read from θ.
inline Matrix coefficient_f(const Vector& theta, const ArxDims& d, int i)
{
    const Eigen::Index p = d.outputs;
    const Eigen::Index offset = static_cast<Eigen::Index>(i - 1) * p * p;
    return Eigen::Map<const Matrix>(theta.data() + offset, p, p);
}

/// G_i block (p × m), i = 1..n̂, read from θ.
inline Matrix coefficient_g(const Vector& theta, const ArxDims& d, int i)
{
    const Eigen::Index p = d.outputs;
    const Eigen::Index m = d.inputs;
    const Eigen::Index offset = static_cast<Eigen::Index>(d.order) * p * p + static_cast<Eigen::Index>(i - 1) * p * m;
    return Eigen::Map<const Matrix>(theta.data() + offset, p, m);
}

inline BocfRealization realize(const Vector& theta, const ArxDims& d)
{
    d.validate();
    detail::require_size(theta.size(), d.theta_size(), "realize (theta)");
    const Eigen::Index p = d.outputs;
    const Eigen::Index np = d.state_size();

    BocfRealization r{d, Matrix::Zero(np, np), Matrix::Zero(np, d.inputs), Matrix::Zero(p, np)};
    for (int i = 1; i <= d.order; ++i) {
        const Eigen::Index row = static_cast<Eigen::Index>(i - 1) * p;
        r.A.block(row, 0, p, p) = -coefficient_f(theta, d, i);
        if (i < d.order) {
            r.A.block(row, row + p, p, p).setIdentity();
        }
        r.B.block(row, 0, p, d.inputs) = coefficient_g(theta, d, i);
    }
    r.C.leftCols(p).setIdentity();
    return r;
}

/// Inverse of `realize`: re-vectorize the F and G blocks of (A, B).
inline Vector extract_theta(const BocfRealization& r)
{
    const auto& d = r.dims;
    const Eigen::Index p = d.outputs;
    const Eigen::Index m = d.inputs;
    Vector theta(d.theta_size());
    for (int i = 1; i <= d.order; ++i) {
        const Eigen::Index row = static_cast<Eigen::Index>(i - 1) * p;
        Eigen::Map<Matrix>(theta.data() + row * p, p, p) = -r.A.block(row, 0, p, p);
        Eigen::Map<Matrix>(theta.data() + d.order * p * p + row * m, p, m) = r.B.block(row, 0, p, m);
    }
    return theta;
}

/**
 * Model state consistent with the current output y_k and the stored history.
 *
 * Block 1 is y_k; block j (2..n̂) is the truncated sum
 *   -Σ_{i=1}^{n̂-j+1} F_{i+j-1} y_{k-i} + Σ_{i=1}^{n̂-j+1} G_{i+j-1} u_{k-i}.
 */
inline BocfState reconstruct_state(const IoHistory& h, const Vector& y_now, const Vector& theta)
{
    const auto& d = h.dims();
    detail::require_size(theta.size(), d.theta_size(), "reconstruct_state (theta)");
    detail::require_size(y_now.size(), d.outputs, "reconstruct_state (y)");
    const Eigen::Index p = d.outputs;

    BocfState s{Vector::Zero(d.state_size())};
    s.x.head(p) = y_now;
    for (int j = 2; j <= d.order; ++j) {
        auto block = s.x.segment(static_cast<Eigen::Index>(j - 1) * p, p);
        for (int i = 1; i <= d.order - j + 1; ++i) {
            block.noalias() -= coefficient_f(theta, d, i + j - 1) * h.output(i);
            block.noalias() += coefficient_g(theta, d, i + j - 1) * h.input(i);
        }
    }
    return s;
}

/// x' = A x + B u; the returned output is y = C x (the output at the current state).
inline std::pair<BocfState, Vector> model_step(const BocfRealization& r, const BocfState& s, const Vector& u)
{
    detail::require_size(s.x.size(), r.A.rows(), "model_step (state)");
    detail::require_size(u.size(), r.B.cols(), "model_step (u)");
    Vector y = r.C * s.x;
    BocfState next{r.A * s.x + r.B * u};
    return {std::move(next), std::move(y)};
}

} // namespace pcac
