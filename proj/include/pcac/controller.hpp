#pragma once

#include <pcac/bocf.hpp>
#include <pcac/common.hpp>
#include <pcac/mpc.hpp>
#include <pcac/qp.hpp>
#include <pcac/rls_vrf.hpp>
#include <pcac/saturation.hpp>

#include <cstdint>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

namespace pcac {

/// Optional PRBS excitation added to the requested control for the first `steps` steps.
struct DitherConfig {
    double amplitude = 0.0;
    int steps = 0;
    std::uint64_t seed = 0;

    bool active() const { return amplitude > 0.0 && steps > 0; }
    bool operator==(const DitherConfig&) const = default;
};

struct PcacConfig {
    ArxDims dims;
    int horizon = 1;
    MpcWeights weights;
    SaturationLimits limits;
    double theta0_scale = 0.01;
    double psi0_scale = 1e5;
    std::optional<Vector> initial_theta; // overrides theta0_scale when set
    ForgettingConfig forgetting;
    DitherConfig dither;
    std::vector<int> output_map; // plant output index per model output
    std::vector<int> input_map;  // plant input index per model input

    void validate() const
    {
        dims.validate();
        if (horizon < 1) {
            throw ConfigError("PcacConfig: horizon must be >= 1");
        }
        limits.validate();
        detail::require_size(limits.channels(), dims.inputs, "PcacConfig.limits");
        weights.validate(horizon, dims.outputs, dims.inputs);
        forgetting.validate(dims.outputs);
        if (initial_theta) {
            detail::require_size(initial_theta->size(), dims.theta_size(), "PcacConfig.initial_theta");
        }
        if (!(psi0_scale > 0.0)) {
            throw ConfigError("PcacConfig: psi_0 scale must be positive");
        }
        if (!output_map.empty()) {
            detail::require_size(static_cast<Eigen::Index>(output_map.size()), dims.outputs, "PcacConfig.output_map");
        }
        if (!input_map.empty()) {
            detail::require_size(static_cast<Eigen::Index>(input_map.size()), dims.inputs, "PcacConfig.input_map");
        }
        for (const auto* map : {&output_map, &input_map}) {
            if (std::set<int>(map->begin(), map->end()).size() != map->size()) {
                throw ConfigError("PcacConfig: index maps must be injective");
            }
        }
        if (dither.amplitude < 0.0 || dither.steps < 0) {
            throw ConfigError("PcacConfig: dither amplitude and duration must be nonnegative");
        }
    }
};

/// Per-step diagnostics returned alongside the requested control.
struct StepReport {
    Vector u_req;
    Vector identification_error;
    double beta = 1.0;
    int qp_iterations = 0;
    double qp_cost = 0.0;
    KktResiduals kkt;
    bool zero_move_feasible = true;
    bool qp_accepted = true; // false: no certified solution, u_req holds the last control
};

/**
 * One predictive cost adaptive control loop.
 *
 * Each `step` consumes y_k and the command preview r_{k+1..k+ℓ}:
 * RLS update, BOCF realization of the fresh coefficients, state
 * reconstruction, x_{k|1} = A x_k + B u_k, QP, and u_{k|1} as the request
 * for the next sample. The loop runner must report the implemented control
 * back via `report_implemented` before the next step.
 *
 * A QP that cannot be certified (cycling or iteration cap on a numerically
 * singular early model) is rejected: the request repeats the last control
 * and the report carries `qp_accepted = false` with zero iterations.
 */
class PcacController {
public:
    explicit PcacController(PcacConfig cfg)
        : cfg_(std::move(cfg)), history_(cfg_.dims), forgetting_(cfg_.forgetting.long_window),
          dither_rng_(cfg_.dither.seed)
    {
        cfg_.validate();
        estimate_ = CoefficientEstimate::initial(cfg_.dims, cfg_.theta0_scale, cfg_.psi0_scale);
        initial_psi_trace_ = estimate_.psi.trace();
        if (cfg_.initial_theta) {
            estimate_.theta = *cfg_.initial_theta;
        }
        last_control_ = Vector::Zero(cfg_.dims.inputs);
    }

    const PcacConfig& config() const { return cfg_; }
    const CoefficientEstimate& estimate() const { return estimate_; }
    const IoHistory& history() const { return history_; }
    const ForgettingState& forgetting_state() const { return forgetting_; }
    const Vector& last_control() const { return last_control_; }
    std::int64_t steps() const { return step_; }

    StepReport step(const Vector& y, const Vector& preview)
    {
        const auto& d = cfg_.dims;
        detail::require_size(y.size(), d.outputs, "PcacController::step (y)");
        detail::require_size(preview.size(), static_cast<Eigen::Index>(cfg_.horizon) * cfg_.weights.command_output.rows(),
                             "PcacController::step (preview)");
        if (awaiting_report_) {
            throw std::logic_error("PcacController::step: implemented control of the previous step was not reported");
        }
        if (!y.allFinite() || !preview.allFinite()) {
            throw NumericalError(context("non-finite measurement or command"));
        }

        StepReport report;
        try {
            const Matrix phi = build_regressor(history_);
            report.identification_error = y - predict_output(phi, estimate_);
            forgetting_.push(report.identification_error);
            report.beta = limit_windup(forgetting_factor(forgetting_, cfg_.forgetting, step_, d.outputs),
                                       estimate_.psi, cfg_.forgetting.psi_trace_ratio * initial_psi_trace_);
            estimate_ = rls_update(estimate_, phi, y, report.beta);

            const BocfRealization model = realize(estimate_.theta, d);
            const BocfState state = reconstruct_state(history_, y, estimate_.theta);
            const Vector x1 = model.A * state.x + model.B * last_control_;

            const PredictionMatrices pm = build_prediction(model, cfg_.horizon);
            const MpcProblem problem = assemble_qp(pm, x1, preview, cfg_.weights, cfg_.limits, last_control_);
            report.zero_move_feasible = problem.qp.max_violation(problem.qp.feasible_point) == 0.0;

            std::optional<Vector> warm;
            if (previous_solution_) {
                warm = shift_controls(*previous_solution_, d.inputs);
            }
            try {
                const QpSolution sol = solve_mpc(problem, warm);
                previous_solution_ = sol.x;
                report.qp_iterations = sol.iterations;
                report.qp_cost = sol.objective;
                report.kkt = sol.residuals;
                report.u_req = first_control(sol, d.inputs);
            } catch (const QpFailure& failure) {
                // Fall back to the zero-move candidate, which is always feasible.
                previous_solution_.reset();
                report.qp_accepted = false;
                report.qp_iterations = 0;
                report.qp_cost = problem.qp.objective(problem.qp.feasible_point);
                report.kkt = failure.residuals();
                report.u_req = last_control_;
            }
        } catch (const std::exception& e) {
            throw NumericalError(context(e.what()));
        }

        if (cfg_.dither.active() && step_ < cfg_.dither.steps) {
            for (Eigen::Index i = 0; i < report.u_req.size(); ++i) {
                const bool high = (dither_rng_() >> 63) != 0;
                report.u_req(i) += high ? cfg_.dither.amplitude : -cfg_.dither.amplitude;
            }
        }
        if (!report.u_req.allFinite()) {
            throw NumericalError(context("non-finite requested control"));
        }

        history_.push(y, last_control_);
        ++step_;
        awaiting_report_ = true;
        return report;
    }

    /// The control the plant will actually receive over the next sample period.
    void report_implemented(const Vector& u)
    {
        detail::require_size(u.size(), cfg_.dims.inputs, "PcacController::report_implemented");
        if (!u.allFinite()) {
            throw NumericalError(context("non-finite implemented control"));
        }
        last_control_ = u;
        awaiting_report_ = false;
    }

private:
    std::string context(const std::string& what) const
    {
        return "PCAC step " + std::to_string(step_) + ": " + what;
    }

    PcacConfig cfg_;
    IoHistory history_;
    ForgettingState forgetting_;
    CoefficientEstimate estimate_;
    Vector last_control_;
    double initial_psi_trace_ = 0.0;
    std::optional<Vector> previous_solution_;
    std::mt19937_64 dither_rng_;
    std::int64_t step_ = 0;
    bool awaiting_report_ = false;
};

} // namespace pcac
