#pragma once

#include <pcac/common.hpp>
#include <pcac/fstats.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <optional>
#include <vector>

namespace pcac {

/// Dimensions of a MIMO ARX model: order n̂, m inputs, p outputs.
struct ArxDims {
    int order = 1;
    int inputs = 1;
    int outputs = 1;

    Eigen::Index theta_size() const
    {
        return static_cast<Eigen::Index>(order) * outputs * (inputs + outputs);
    }
    Eigen::Index state_size() const { return static_cast<Eigen::Index>(order) * outputs; }

    void validate() const
    {
        if (order < 1 || inputs < 1 || outputs < 1) {
            throw ConfigError("ArxDims: order, inputs and outputs must be >= 1");
        }
    }

    bool operator==(const ArxDims&) const = default;
};

/**
 * The n̂ most recent input/output samples, newest first.
 *
 * Starts zero-filled, which encodes y_{-n̂} = ... = y_{-1} = 0 and the same
 * for u. Backed by a ring buffer; `output(i)` is y_{k-i} for i = 1..n̂.
 */
class IoHistory {
public:
    explicit IoHistory(ArxDims dims) : dims_(dims)
    {
        dims_.validate();
        outputs_.assign(dims_.order, Vector::Zero(dims_.outputs));
        inputs_.assign(dims_.order, Vector::Zero(dims_.inputs));
    }

    const ArxDims& dims() const { return dims_; }

    const Vector& output(int lag) const { return outputs_[slot(lag)]; }
    const Vector& input(int lag) const { return inputs_[slot(lag)]; }

    /// Shift in the sample pair (y_k, u_k); the oldest pair drops out.
    void push(const Vector& y, const Vector& u)
    {
        detail::require_size(y.size(), dims_.outputs, "IoHistory::push (y)");
        detail::require_size(u.size(), dims_.inputs, "IoHistory::push (u)");
        head_ = (head_ + dims_.order - 1) % dims_.order;
        outputs_[head_] = y;
        inputs_[head_] = u;
    }

private:
    std::size_t slot(int lag) const
    {
        if (lag < 1 || lag > dims_.order) {
            throw DimensionError("IoHistory: lag " + std::to_string(lag) + " outside 1.." +
                                 std::to_string(dims_.order));
        }
        return static_cast<std::size_t>((head_ + lag - 1) % dims_.order);
    }

    ArxDims dims_;
    std::vector<Vector> outputs_;
    std::vector<Vector> inputs_;
    int head_ = 0;
};

/**
 * RLS state. `theta` stacks vec[F_1 ... F_n̂] then vec[G_1 ... G_n̂]
 * (column-major), `psi` is the symmetric positive-definite gain matrix.
 */
struct CoefficientEstimate {
    Vector theta;
    Matrix psi;

    static CoefficientEstimate initial(const ArxDims& dims, double theta_scale, double psi_scale)
    {
        dims.validate();
        if (!(psi_scale > 0.0) || !std::isfinite(psi_scale)) {
            throw ConfigError("CoefficientEstimate: psi_0 scale must be positive");
        }
        const auto n = dims.theta_size();
        return {Vector::Constant(n, theta_scale), psi_scale * Matrix::Identity(n, n)};
    }
};

/// φ_k = [-y_{k-1}ᵀ ... -y_{k-n̂}ᵀ  u_{k-1}ᵀ ... u_{k-n̂}ᵀ] ⊗ I_p.
inline Matrix build_regressor(const IoHistory& h)
{
    const auto& d = h.dims();
    const Eigen::Index p = d.outputs;
    const Eigen::Index z_len = static_cast<Eigen::Index>(d.order) * (d.outputs + d.inputs);
    Vector z(z_len);
    Eigen::Index pos = 0;
    for (int i = 1; i <= d.order; ++i) {
        z.segment(pos, p) = -h.output(i);
        pos += p;
    }
    for (int i = 1; i <= d.order; ++i) {
        z.segment(pos, d.inputs) = h.input(i);
        pos += d.inputs;
    }
    Matrix phi = Matrix::Zero(p, z_len * p);
    for (Eigen::Index j = 0; j < z_len; ++j) {
        for (Eigen::Index r = 0; r < p; ++r) {
            phi(r, j * p + r) = z(j);
        }
    }
    return phi;
}

inline Vector predict_output(const Matrix& phi, const CoefficientEstimate& est)
{
    if (phi.cols() != est.theta.size()) {
        throw DimensionError("predict_output: regressor has " + std::to_string(phi.cols()) +
                             " columns, theta has " + std::to_string(est.theta.size()));
    }
    return phi * est.theta;
}

/**
 * Variable-rate forgetting parameters.
 *
 * `short_window` (τ_n) errors are compared against the preceding
 * `long_window - short_window` errors; `significance` is α_F.
 */
struct ForgettingConfig {
    bool enabled = false;
    double eta = 0.025;
    int short_window = 40;
    int long_window = 200;
    double significance = 0.001;
    double max_beta = 1.1; // ceiling on β; bounds ψ growth when the older window is near zero
    double psi_trace_ratio = 1.0; // forgetting pauses while tr ψ exceeds this multiple of tr ψ₀

    void validate(int outputs) const
    {
        if (!enabled) {
            return;
        }
        if (!(eta > 0.0)) {
            throw ConfigError("ForgettingConfig: eta must be positive");
        }
        if (!(long_window > outputs)) {
            throw ConfigError("ForgettingConfig: long window must exceed the output count");
        }
        if (!(short_window >= outputs && short_window < long_window)) {
            throw ConfigError("ForgettingConfig: short window must lie in [p, long window)");
        }
        if (!(significance > 0.0 && significance <= 1.0)) {
            throw ConfigError("ForgettingConfig: significance must lie in (0,1]");
        }
        if (!(max_beta >= 1.0) || !std::isfinite(max_beta)) {
            throw ConfigError("ForgettingConfig: max_beta must be finite and >= 1");
        }
        if (!(psi_trace_ratio > 0.0) || !std::isfinite(psi_trace_ratio)) {
            throw ConfigError("ForgettingConfig: psi_trace_ratio must be finite and positive");
        }
    }

    bool operator==(const ForgettingConfig&) const = default;
};

/// Trailing window of identification errors feeding the forgetting trigger.
class ForgettingState {
public:
    ForgettingState() = default;
    explicit ForgettingState(int capacity) : capacity_(capacity) {}

    /// Record e_k(θ_k). Keeps at most `capacity` errors (the long window).
    void push(const Vector& error)
    {
        errors_.push_back(error);
        while (static_cast<int>(errors_.size()) > capacity_) {
            errors_.pop_front();
        }
        ++steps_;
    }

    const std::deque<Vector>& errors() const { return errors_; }
    std::int64_t steps() const { return steps_; }
    int capacity() const { return capacity_; }

    // Quantile threshold cache; depends only on (p, τ_n, τ_d, α_F).
    double threshold(const ForgettingConfig& cfg, int outputs) const
    {
        const Key key{outputs, cfg.short_window, cfg.long_window, cfg.significance};
        if (!cached_ || !(cached_->first == key)) {
            const double d1 = static_cast<double>(outputs) * cfg.short_window;
            const double d2 = static_cast<double>(outputs) * (cfg.long_window - cfg.short_window);
            double value = 0.0;
            // α_F = 1 puts the quantile at F = 0: any inflation triggers.
            if (cfg.significance < 1.0) {
                value = f_quantile(1.0 - cfg.significance, d1, d2);
            }
            cached_ = std::make_pair(key, value);
        }
        return cached_->second;
    }

private:
    struct Key {
        int outputs;
        int short_window;
        int long_window;
        double significance;
        bool operator==(const Key&) const = default;
    };

    int capacity_ = 0;
    std::deque<Vector> errors_;
    std::int64_t steps_ = 0;
    mutable std::optional<std::pair<Key, double>> cached_;
};

/**
 * F-test forgetting statistic over the stored error window.
 *
 *   F̂ = mean ‖e‖² over the last τ_n errors / mean ‖e‖² over the τ_d - τ_n before them
 *   ḡ = max(0, sqrt(F̂ / F⁻¹(1 - α_F; pτ_n, p(τ_d - τ_n))) - 1)
 *
 * This is a stand-in for the reference statistic; it is monotone in the
 * recent errors and zero unless they are significantly inflated.
 */
inline double forgetting_statistic(const ForgettingState& state, const ForgettingConfig& cfg, int outputs)
{
    const auto& errs = state.errors();
    const int n_short = cfg.short_window;
    const int n_long = cfg.long_window;
    if (static_cast<int>(errs.size()) < n_long) {
        return 0.0;
    }
    const std::size_t base = errs.size() - static_cast<std::size_t>(n_long);
    double older = 0.0;
    double recent = 0.0;
    for (int i = 0; i < n_long; ++i) {
        const double sq = errs[base + static_cast<std::size_t>(i)].squaredNorm();
        if (i < n_long - n_short) {
            older += sq;
        } else {
            recent += sq;
        }
    }
    if (recent == 0.0) {
        return 0.0;
    }
    if (older == 0.0) {
        return HUGE_VAL;
    }
    const double ratio = (recent / n_short) / (older / (n_long - n_short));
    const double threshold = state.threshold(cfg, outputs);
    if (threshold <= 0.0) {
        return HUGE_VAL;
    }
    return std::max(0.0, std::sqrt(ratio / threshold) - 1.0);
}

/// β_k = min(1 + η ḡ, max_beta) ≥ 1; the forgetting factor is λ_k = 1/β_k.
inline double forgetting_factor(const ForgettingState& state, const ForgettingConfig& cfg, std::int64_t k,
                                int outputs)
{
    if (!cfg.enabled || k < cfg.long_window) {
        return 1.0;
    }
    cfg.validate(outputs);
    const double g = forgetting_statistic(state, cfg, outputs);
    return g > 0.0 ? std::min(1.0 + cfg.eta * g, cfg.max_beta) : 1.0;
}

/// Anti-windup: β falls back to 1 while tr ψ is above `trace_limit`.
inline double limit_windup(double beta, const Matrix& psi, double trace_limit)
{
    return psi.trace() > trace_limit ? 1.0 : beta;
}

/**
 * One RLS step with forgetting input β:
 *
 *   ψ' = βψ - βψφᵀ((1/β)I + φψφᵀ)⁻¹φψ
 *   θ' = θ + ψ'φᵀ(y - φθ)
 */
inline CoefficientEstimate rls_update(const CoefficientEstimate& est, const Matrix& phi, const Vector& y,
                                      double beta)
{
    const auto n = est.theta.size();
    detail::require_shape(est.psi, n, n, "rls_update (psi)");
    detail::require_size(phi.cols(), n, "rls_update (regressor columns)");
    detail::require_size(y.size(), phi.rows(), "rls_update (y)");
    if (!(beta >= 1.0) || !std::isfinite(beta)) {
        throw ConfigError("rls_update: beta must be finite and >= 1");
    }

    const Matrix psi_phi_t = est.psi * phi.transpose();
    Matrix innovation = phi * psi_phi_t;
    innovation.diagonal().array() += 1.0 / beta;
    Eigen::LLT<Matrix> llt(innovation);
    if (llt.info() != Eigen::Success) {
        throw NumericalError("rls_update: innovation matrix is not positive definite");
    }
    const Matrix gain = llt.solve(psi_phi_t.transpose()).transpose(); // ψφᵀ S⁻¹, n×p

    // Joseph form of β(ψ - Kφψ): a sum of PSD terms, so ψ stays PSD under rounding
    // even when forgetting has inflated it by many orders of magnitude.
    Matrix keep = -gain * phi;
    keep.diagonal().array() += 1.0;
    CoefficientEstimate next;
    next.psi = beta * (keep * est.psi * keep.transpose()) + gain * gain.transpose();
    next.psi = 0.5 * (next.psi + next.psi.transpose()).eval();
    next.theta = est.theta + next.psi * (phi.transpose() * (y - phi * est.theta));
    if (!next.theta.allFinite() || !next.psi.allFinite()) {
        throw NumericalError("rls_update: non-finite estimate");
    }
    return next;
}

} // namespace pcac
