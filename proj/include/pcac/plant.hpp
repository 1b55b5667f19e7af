#pragma once

#include <pcac/common.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <variant>

namespace pcac {

/**
 * Classical fourth-order Runge-Kutta, `substeps` steps of size `dt` with the
 * control held constant (zero-order hold). `f(x, u)` returns ẋ.
 */
template <typename Derivative>
Vector rk4_step(Derivative&& f, const Vector& x, const Vector& u, double dt, int substeps)
{
    if (!(dt > 0.0) || substeps < 1) {
        throw ConfigError("rk4_step: dt must be positive and substeps >= 1");
    }
    Vector state = x;
    for (int s = 0; s < substeps; ++s) {
        const Vector k1 = f(state, u);
        const Vector k2 = f((state + 0.5 * dt * k1).eval(), u);
        const Vector k3 = f((state + 0.5 * dt * k2).eval(), u);
        const Vector k4 = f((state + dt * k3).eval(), u);
        state += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if (!state.allFinite()) {
            throw NumericalError("rk4_step: non-finite state");
        }
    }
    return state;
}

/// Continuous-time ẋ = Ax + Bu, y = Cx (strictly proper).
struct LtiPlant {
    Matrix A;
    Matrix B;
    Matrix C;
    Vector x0;

    Eigen::Index states() const { return A.rows(); }
    Eigen::Index inputs() const { return B.cols(); }
    Eigen::Index outputs() const { return C.rows(); }

    void validate() const
    {
        const auto n = A.rows();
        if (n < 1) {
            throw ConfigError("LtiPlant: empty state");
        }
        detail::require_shape(A, n, n, "LtiPlant.A");
        detail::require_shape(B, n, B.cols(), "LtiPlant.B");
        detail::require_shape(C, C.rows(), n, "LtiPlant.C");
        detail::require_size(x0.size(), n, "LtiPlant.x0");
        if (B.cols() < 1 || C.rows() < 1) {
            throw ConfigError("LtiPlant: needs at least one input and one output");
        }
    }

    Vector initial_state() const { return x0; }

    Vector derivative(const Vector& x, const Vector& u) const
    {
        detail::require_size(x.size(), A.rows(), "LtiPlant::derivative (x)");
        detail::require_size(u.size(), B.cols(), "LtiPlant::derivative (u)");
        return A * x + B * u;
    }

    Vector output(const Vector& x) const { return C * x; }
};

/// Aerodynamic and mass data of the longitudinal point-mass model.
struct ThreeDofParameters {
    double mass = 50000.0;        // kg
    double wing_area = 122.6;     // m²
    double chord = 4.19;          // m, mean aerodynamic chord
    double air_density = 1.0066;  // kg/m³
    double gravity = 9.80665;     // m/s²
    double pitch_inertia = 2.5e6; // kg m²
    double cl0 = 1.1;
    double cl_alpha = 5.5;        // 1/rad
    double cl_elevator = 0.4;     // 1/rad
    double cd0 = 0.05;
    double induced_drag = 0.04;
    double cm0 = 0.0;
    double cm_alpha = -1.2;       // 1/rad
    double cm_pitch_rate = -15.0; // per unit q c / (2V)
    double cm_elevator = -1.4;    // 1/rad
    double max_thrust = 88000.0;  // N at full throttle

    void validate() const
    {
        if (!(mass > 0.0 && wing_area > 0.0 && chord > 0.0 && pitch_inertia > 0.0 && air_density > 0.0 &&
              gravity > 0.0)) {
            throw ConfigError("ThreeDofParameters: mass, areas, inertia, density and gravity must be positive");
        }
        if (!(max_thrust >= 0.0)) {
            throw ConfigError("ThreeDofParameters: max thrust must be nonnegative");
        }
    }

    bool operator==(const ThreeDofParameters&) const = default;
};

/**
 * Nonlinear longitudinal point-mass aircraft.
 *
 * State  [V (m/s), γ (rad), h (m), θ (rad), q (rad/s)].
 * Input  [δe (deg), throttle (0..1, clipped)].
 * Output [h - h₀ (m), α (deg), V - V₀ (m/s), θ (deg), γ (deg), q (deg/s)],
 * measured relative to the initial altitude and airspeed.
 */
struct ThreeDofLongitudinalPlant {
    ThreeDofParameters params;
    Vector x0 = (Vector(5) << 85.0, 0.0, 2000.0, 0.0, 0.0).finished();

    static constexpr Eigen::Index kStates = 5;
    static constexpr Eigen::Index kInputs = 2;
    static constexpr Eigen::Index kOutputs = 6;

    Eigen::Index states() const { return kStates; }
    Eigen::Index inputs() const { return kInputs; }
    Eigen::Index outputs() const { return kOutputs; }

    void validate() const
    {
        params.validate();
        detail::require_size(x0.size(), kStates, "ThreeDofLongitudinalPlant.x0");
        if (!(x0(0) > 0.0)) {
            throw ConfigError("ThreeDofLongitudinalPlant: initial airspeed must be positive");
        }
    }

    Vector initial_state() const { return x0; }

    Vector derivative(const Vector& x, const Vector& u) const
    {
        detail::require_size(x.size(), kStates, "ThreeDofLongitudinalPlant::derivative (x)");
        detail::require_size(u.size(), kInputs, "ThreeDofLongitudinalPlant::derivative (u)");
        const auto& p = params;
        const double v = x(0);
        const double gamma = x(1);
        const double theta = x(3);
        const double q = x(4);
        if (!(v > 0.0)) {
            throw NumericalError("ThreeDofLongitudinalPlant: airspeed " + std::to_string(v) +
                                 " m/s is outside the model's validity");
        }
        constexpr double deg = std::numbers::pi / 180.0;
        const double elevator = u(0) * deg;
        const double throttle = std::clamp(u(1), 0.0, 1.0);

        const double alpha = theta - gamma;
        const double qbar_s = 0.5 * p.air_density * v * v * p.wing_area;
        const double cl = p.cl0 + p.cl_alpha * alpha + p.cl_elevator * elevator;
        const double cd = p.cd0 + p.induced_drag * cl * cl;
        const double cm = p.cm0 + p.cm_alpha * alpha + p.cm_pitch_rate * q * p.chord / (2.0 * v) +
                          p.cm_elevator * elevator;
        const double lift = qbar_s * cl;
        const double drag = qbar_s * cd;
        const double moment = qbar_s * p.chord * cm;
        const double thrust = p.max_thrust * throttle;

        Vector dx(kStates);
        dx(0) = (thrust * std::cos(alpha) - drag) / p.mass - p.gravity * std::sin(gamma);
        dx(1) = (lift + thrust * std::sin(alpha)) / (p.mass * v) - p.gravity * std::cos(gamma) / v;
        dx(2) = v * std::sin(gamma);
        dx(3) = q;
        dx(4) = moment / p.pitch_inertia;
        return dx;
    }

    Vector output(const Vector& x) const
    {
        constexpr double rad2deg = 180.0 / std::numbers::pi;
        Vector y(kOutputs);
        y << x(2) - x0(2), (x(3) - x(1)) * rad2deg, x(0) - x0(0), x(3) * rad2deg, x(1) * rad2deg, x(4) * rad2deg;
        return y;
    }
};

using AnyPlant = std::variant<LtiPlant, ThreeDofLongitudinalPlant>;

inline Eigen::Index plant_inputs(const AnyPlant& p)
{
    return std::visit([](const auto& pl) { return pl.inputs(); }, p);
}

inline Eigen::Index plant_outputs(const AnyPlant& p)
{
    return std::visit([](const auto& pl) { return pl.outputs(); }, p);
}

/// Advance a plant over one sample period under ZOH.
inline Vector advance_plant(const AnyPlant& plant, const Vector& x, const Vector& u, double sample_time, int substeps)
{
    return std::visit(
        [&](const auto& pl) {
            return rk4_step([&pl](const Vector& s, const Vector& in) { return pl.derivative(s, in); }, x, u,
                            sample_time / substeps, substeps);
        },
        plant);
}

} // namespace pcac
