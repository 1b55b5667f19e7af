#pragma once

#include <pcac/common.hpp>

#include <utility>
#include <vector>

namespace pcac {

/// Piecewise-linear command r(t) through (time, value) knots; held constant outside the knot span.
struct CommandTrajectory {
    std::vector<std::pair<double, double>> knots;

    static CommandTrajectory constant(double value) { return {{{0.0, value}}}; }

    /// Knots nonempty, strictly increasing in time, first knot at or before t = 0.
    void validate() const
    {
        if (knots.empty()) {
            throw ConfigError("CommandTrajectory: no knots");
        }
        if (knots.front().first > 0.0) {
            throw ConfigError("CommandTrajectory: first knot must be at or before t = 0");
        }
        for (std::size_t i = 1; i < knots.size(); ++i) {
            if (!(knots[i].first > knots[i - 1].first)) {
                throw ConfigError("CommandTrajectory: knot times must be strictly increasing");
            }
        }
    }

    double at(double t) const
    {
        if (t <= knots.front().first) {
            return knots.front().second;
        }
        for (std::size_t i = 1; i < knots.size(); ++i) {
            const auto& [t1, v1] = knots[i];
            if (t <= t1) {
                const auto& [t0, v0] = knots[i - 1];
                return v0 + (v1 - v0) * (t - t0) / (t1 - t0);
            }
        }
        return knots.back().second;
    }

    double span() const
    {
        double lo = knots.front().second;
        double hi = lo;
        for (const auto& k : knots) {
            lo = std::min(lo, k.second);
            hi = std::max(hi, k.second);
        }
        return hi - lo;
    }

    bool operator==(const CommandTrajectory&) const = default;
};

} // namespace pcac
