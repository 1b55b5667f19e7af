#pragma once

#include <pcac/common.hpp>

#include <boost/math/special_functions/beta.hpp>

#include <cmath>
#include <utility>

namespace pcac {

/// Quantile query for the F(d1, d2) distribution at probability p.
struct FQuantileQuery {
    double p;
    double d1;
    double d2;

    void validate() const
    {
        if (!(p > 0.0 && p < 1.0)) {
            throw ConfigError("FQuantileQuery: p must lie in (0,1)");
        }
        if (!(d1 > 0.0) || !(d2 > 0.0) || !std::isfinite(d1) || !std::isfinite(d2)) {
            throw ConfigError("FQuantileQuery: degrees of freedom must be positive and finite");
        }
    }
};

/// Regularized incomplete beta I_x(a, b).
inline double regularized_incomplete_beta(double x, double a, double b)
{
    if (!(x >= 0.0 && x <= 1.0)) {
        throw ConfigError("regularized_incomplete_beta: x outside [0,1]");
    }
    if (!(a > 0.0) || !(b > 0.0) || !std::isfinite(a) || !std::isfinite(b)) {
        throw ConfigError("regularized_incomplete_beta: shape parameters must be positive");
    }
    if (x == 0.0) {
        return 0.0;
    }
    if (x == 1.0) {
        return 1.0;
    }
    return boost::math::ibeta(a, b, x);
}

/// CDF of the F(d1, d2) distribution.
inline double f_cdf(double f, double d1, double d2)
{
    if (!(d1 > 0.0) || !(d2 > 0.0)) {
        throw ConfigError("f_cdf: degrees of freedom must be positive");
    }
    if (!(f > 0.0)) {
        return 0.0;
    }
    if (std::isinf(f)) {
        return 1.0;
    }
    return regularized_incomplete_beta(d1 * f / (d1 * f + d2), 0.5 * d1, 0.5 * d2);
}

namespace detail {

// Upper tail 1 - CDF without cancellation: I_{d2/(d1 f + d2)}(d2/2, d1/2).
inline double f_survival(double f, double d1, double d2)
{
    if (!(f > 0.0)) {
        return 1.0;
    }
    return regularized_incomplete_beta(d2 / (d1 * f + d2), 0.5 * d2, 0.5 * d1);
}

// d CDF / d ln f = f * density(f).
inline double f_log_density_slope(double f, double d1, double d2)
{
    const double z = d1 * f / (d1 * f + d2);
    const double dz_df = d1 * d2 / ((d1 * f + d2) * (d1 * f + d2));
    return boost::math::ibeta_derivative(0.5 * d1, 0.5 * d2, z) * dz_df * f;
}

} // namespace detail

/**
 * Inverse CDF of the F(d1, d2) distribution.
 *
 * Root-finds in t = ln F with a bracketed, safeguarded Newton iteration.
 * Upper-half probabilities are matched against the survival function so the
 * residual keeps full relative precision in the far tail.
 */
inline double f_quantile(const FQuantileQuery& q)
{
    q.validate();
    const bool upper = q.p > 0.5;
    const double target = upper ? 1.0 - q.p : q.p;

    // Increasing in t in both branches.
    auto residual = [&](double t) {
        const double f = std::exp(t);
        return upper ? target - detail::f_survival(f, q.d1, q.d2)
                     : f_cdf(f, q.d1, q.d2) - target;
    };

    double lo = -1.0;
    double hi = 1.0;
    int expansions = 0;
    while (residual(lo) > 0.0) {
        hi = lo;
        lo *= 2.0;
        if (++expansions > 64) {
            throw NumericalError("f_quantile: failed to bracket lower end");
        }
    }
    while (residual(hi) < 0.0) {
        lo = hi;
        hi *= 2.0;
        if (++expansions > 128) {
            throw NumericalError("f_quantile: failed to bracket upper end");
        }
    }

    double t = 0.5 * (lo + hi);
    constexpr int max_iterations = 200;
    for (int it = 0; it < max_iterations; ++it) {
        const double r = residual(t);
        if (r == 0.0) {
            return std::exp(t);
        }
        if (r < 0.0) {
            lo = t;
        } else {
            hi = t;
        }
        const double slope = detail::f_log_density_slope(std::exp(t), q.d1, q.d2);
        double next = t - r / slope;
        if (!(slope > 0.0) || !std::isfinite(next) || next <= lo || next >= hi) {
            next = 0.5 * (lo + hi);
        }
        if (std::abs(next - t) <= 1e-15 * std::max(1.0, std::abs(t)) || hi - lo <= 1e-15) {
            return std::exp(next);
        }
        t = next;
    }
    throw NumericalError("f_quantile: no convergence for p=" + std::to_string(q.p) +
                         " d1=" + std::to_string(q.d1) + " d2=" + std::to_string(q.d2));
}

inline double f_quantile(double p, double d1, double d2)
{
    return f_quantile(FQuantileQuery{p, d1, d2});
}

} // namespace pcac
