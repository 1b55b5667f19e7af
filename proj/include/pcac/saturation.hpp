#pragma once

#include <pcac/common.hpp>

namespace pcac {

/**
 * Per-channel actuator limits: magnitude box [u_min, u_max] and move-size
 * box [du_min, du_max] (units per step). The move-size box must contain zero
 * so that holding the previous control is always rate-feasible.
 */
struct SaturationLimits {
    Vector u_min;
    Vector u_max;
    Vector du_min;
    Vector du_max;

    static SaturationLimits symmetric(const Vector& magnitude, const Vector& rate)
    {
        SaturationLimits lim{-magnitude, magnitude, -rate, rate};
        lim.validate();
        return lim;
    }

    Eigen::Index channels() const { return u_min.size(); }

    void validate() const
    {
        const auto m = u_min.size();
        detail::require_size(u_max.size(), m, "SaturationLimits.u_max");
        detail::require_size(du_min.size(), m, "SaturationLimits.du_min");
        detail::require_size(du_max.size(), m, "SaturationLimits.du_max");
        for (Eigen::Index i = 0; i < m; ++i) {
            if (!(u_min(i) <= u_max(i))) {
                throw ConfigError("SaturationLimits: u_min > u_max on channel " + std::to_string(i));
            }
            if (!(du_min(i) <= 0.0 && 0.0 <= du_max(i))) {
                throw ConfigError("SaturationLimits: move-size box must contain 0 on channel " +
                                  std::to_string(i));
            }
        }
    }
};

/// Componentwise clip of `u` to [u_min, u_max].
inline Vector saturate_magnitude(const Vector& u, const SaturationLimits& lim)
{
    detail::require_size(u.size(), lim.channels(), "saturate_magnitude");
    return u.cwiseMax(lim.u_min).cwiseMin(lim.u_max);
}

/// Componentwise clip of the move u - u_prev to [du_min, du_max].
inline Vector saturate_rate(const Vector& u, const Vector& u_prev, const SaturationLimits& lim)
{
    detail::require_size(u.size(), lim.channels(), "saturate_rate");
    detail::require_size(u_prev.size(), lim.channels(), "saturate_rate (u_prev)");
    Vector out(u.size());
    for (Eigen::Index i = 0; i < u.size(); ++i) {
        const double move = u(i) - u_prev(i);
        if (move > lim.du_max(i)) {
            out(i) = u_prev(i) + lim.du_max(i);
            // Rounding may leave (out - u_prev) one ulp above the bound.
            while (out(i) - u_prev(i) > lim.du_max(i)) {
                out(i) = std::nextafter(out(i), -HUGE_VAL);
            }
        } else if (move < lim.du_min(i)) {
            out(i) = u_prev(i) + lim.du_min(i);
            while (out(i) - u_prev(i) < lim.du_min(i)) {
                out(i) = std::nextafter(out(i), HUGE_VAL);
            }
        } else {
            out(i) = u(i);
        }
    }
    return out;
}

/// Requested control to implemented control: magnitude clip first, then rate clip.
inline Vector apply_actuation(const Vector& u_req, const Vector& u_prev, const SaturationLimits& lim)
{
    return saturate_rate(saturate_magnitude(u_req, lim), u_prev, lim);
}

} // namespace pcac
