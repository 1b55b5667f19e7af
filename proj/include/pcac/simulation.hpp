#pragma once

#include <pcac/common.hpp>
#include <pcac/controller.hpp>
#include <pcac/plant.hpp>
#include <pcac/saturation.hpp>
#include <pcac/trajectory.hpp>

#include <cstdint>
#include <set>
#include <string>
#include <vector>

namespace pcac {

/// A controller together with its command trajectories (one per tracked output).
struct LoopBinding {
    std::string name;
    PcacController controller;
    std::vector<CommandTrajectory> commands;
};

/// Plant IO naming and the constant input added under every control channel.
struct PlantIo {
    std::vector<std::string> output_names;
    std::vector<std::string> input_names;
    Vector input_trim;
};

struct RunSettings {
    double sample_time = 0.05;
    std::int64_t steps = 1;
    int substeps = 10;
};

/**
 * Loop signals at one sample. `u` is the control held over [kT_s, (k+1)T_s)
 * and `u_req` the request it was produced from; `beta`, `qp_*` and
 * `theta_norm` describe the update computed at this sample.
 */
struct LoopRecord {
    Vector r;
    Vector yt;
    Vector u_req;
    Vector u;
    double beta = 1.0;
    int qp_iterations = 0;
    double qp_cost = 0.0;
    double theta_norm = 0.0;
    KktResiduals kkt;
    bool zero_move_feasible = true;
    bool qp_accepted = true;
};

struct StepRecord {
    std::int64_t k = 0;
    double t = 0.0;
    Vector y; // measured plant outputs, see SimulationTrace::output_names
    std::vector<LoopRecord> loops;
};

struct TraceLoopInfo {
    std::string name;
    int tracked = 0;
    std::vector<std::string> input_names;
    SaturationLimits limits;
};

struct SimulationTrace {
    double sample_time = 0.0;
    std::vector<std::string> output_names;
    std::vector<TraceLoopInfo> loops;
    std::vector<StepRecord> steps;
    std::string config_echo;
};

namespace detail {

inline Vector gather(const Vector& v, const std::vector<int>& idx)
{
    Vector out(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i) {
        out(static_cast<Eigen::Index>(i)) = v(idx[i]);
    }
    return out;
}

inline Vector command_stack(const std::vector<CommandTrajectory>& cmds, double t0, double dt, int count)
{
    const auto pt = static_cast<Eigen::Index>(cmds.size());
    Vector out(pt * count);
    for (int i = 0; i < count; ++i) {
        for (Eigen::Index j = 0; j < pt; ++j) {
            out(i * pt + j) = cmds[static_cast<std::size_t>(j)].at(t0 + i * dt);
        }
    }
    return out;
}

inline bool within_limits(const Vector& u, const Vector& u_prev, const SaturationLimits& lim)
{
    for (Eigen::Index i = 0; i < u.size(); ++i) {
        const double move = u(i) - u_prev(i);
        if (u(i) < lim.u_min(i) || u(i) > lim.u_max(i) || move < lim.du_min(i) || move > lim.du_max(i)) {
            return false;
        }
    }
    return true;
}

} // namespace detail

/**
 * Sampled-data closed loop. At each sample k every controller sees its
 * outputs y_k and the preview r_{k+1..k+ℓ}; its request becomes the next
 * implemented control through magnitude then rate saturation; the plant is
 * integrated over one period with the current controls held.
 */
inline SimulationTrace run_closed_loop(const AnyPlant& plant, const PlantIo& io, std::vector<LoopBinding>& loops,
                                       const RunSettings& settings)
{
    if (!(settings.sample_time > 0.0) || settings.steps < 1 || settings.substeps < 1) {
        throw ConfigError("run_closed_loop: sample time, steps and substeps must be positive");
    }
    const Eigen::Index n_out = plant_outputs(plant);
    const Eigen::Index n_in = plant_inputs(plant);
    detail::require_size(io.input_trim.size(), n_in, "run_closed_loop (input trim)");
    detail::require_size(static_cast<Eigen::Index>(io.output_names.size()), n_out, "run_closed_loop (output names)");
    detail::require_size(static_cast<Eigen::Index>(io.input_names.size()), n_in, "run_closed_loop (input names)");

    std::set<int> used_inputs;
    for (const auto& loop : loops) {
        const auto& cfg = loop.controller.config();
        for (int idx : cfg.output_map) {
            if (idx < 0 || idx >= n_out) {
                throw ConfigError("run_closed_loop: loop '" + loop.name + "' maps a nonexistent output");
            }
        }
        for (int idx : cfg.input_map) {
            if (idx < 0 || idx >= n_in) {
                throw ConfigError("run_closed_loop: loop '" + loop.name + "' maps a nonexistent input");
            }
            if (!used_inputs.insert(idx).second) {
                throw ConfigError("run_closed_loop: plant input " + std::to_string(idx) + " driven by two loops");
            }
        }
        if (cfg.output_map.size() != static_cast<std::size_t>(cfg.dims.outputs) ||
            cfg.input_map.size() != static_cast<std::size_t>(cfg.dims.inputs)) {
            throw ConfigError("run_closed_loop: loop '" + loop.name + "' has incomplete IO maps");
        }
        if (loop.commands.size() != static_cast<std::size_t>(cfg.weights.command_output.rows())) {
            throw ConfigError("run_closed_loop: loop '" + loop.name + "' needs one command per tracked output");
        }
    }

    // Only plant outputs some loop measures are recorded, in plant order.
    std::set<int> measured;
    for (const auto& loop : loops) {
        measured.insert(loop.controller.config().output_map.begin(), loop.controller.config().output_map.end());
    }
    const std::vector<int> recorded(measured.begin(), measured.end());

    SimulationTrace trace;
    trace.sample_time = settings.sample_time;
    for (int idx : recorded) {
        trace.output_names.push_back(io.output_names[static_cast<std::size_t>(idx)]);
    }
    for (const auto& loop : loops) {
        TraceLoopInfo info;
        info.name = loop.name;
        info.tracked = static_cast<int>(loop.commands.size());
        for (int idx : loop.controller.config().input_map) {
            info.input_names.push_back(io.input_names[static_cast<std::size_t>(idx)]);
        }
        info.limits = loop.controller.config().limits;
        trace.loops.push_back(std::move(info));
    }
    trace.steps.reserve(static_cast<std::size_t>(settings.steps));

    // Current implemented control per loop, and the request it came from.
    std::vector<Vector> u_now;
    std::vector<Vector> u_req_now;
    for (const auto& loop : loops) {
        const auto m = loop.controller.config().dims.inputs;
        u_req_now.push_back(Vector::Zero(m));
        u_now.push_back(apply_actuation(Vector::Zero(m), Vector::Zero(m), loop.controller.config().limits));
        loops[u_now.size() - 1].controller.report_implemented(u_now.back());
    }

    Vector x = std::visit([](const auto& p) { return p.initial_state(); }, plant);
    const double ts = settings.sample_time;
    for (std::int64_t k = 0; k < settings.steps; ++k) {
        StepRecord rec;
        rec.k = k;
        rec.t = static_cast<double>(k) * ts;
        const Vector y_plant = std::visit([&x](const auto& p) { return p.output(x); }, plant);
        rec.y = detail::gather(y_plant, recorded);
        if (!y_plant.allFinite()) {
            throw NumericalError("run_closed_loop: non-finite plant output at step " + std::to_string(k));
        }

        Vector u_plant = io.input_trim;
        for (std::size_t li = 0; li < loops.size(); ++li) {
            auto& loop = loops[li];
            const auto& cfg = loop.controller.config();
            LoopRecord lr;
            const Vector y_loop = detail::gather(y_plant, cfg.output_map);
            lr.yt = cfg.weights.command_output * y_loop;
            lr.r = detail::command_stack(loop.commands, rec.t, ts, 1);
            lr.u = u_now[li];
            lr.u_req = u_req_now[li];

            const Vector preview = detail::command_stack(loop.commands, rec.t + ts, ts, cfg.horizon);
            const StepReport report = loop.controller.step(y_loop, preview);
            if (!report.zero_move_feasible) {
                throw NumericalError("run_closed_loop: zero-move candidate infeasible at step " + std::to_string(k));
            }
            const Vector u_next = apply_actuation(report.u_req, u_now[li], cfg.limits);
            if (!detail::within_limits(u_next, u_now[li], cfg.limits)) {
                throw NumericalError("run_closed_loop: actuation left the constraint set at step " +
                                     std::to_string(k));
            }
            loop.controller.report_implemented(u_next);

            lr.beta = report.beta;
            lr.qp_iterations = report.qp_iterations;
            lr.qp_cost = report.qp_cost;
            lr.kkt = report.kkt;
            lr.zero_move_feasible = report.zero_move_feasible;
            lr.qp_accepted = report.qp_accepted;
            lr.theta_norm = loop.controller.estimate().theta.norm();

            for (std::size_t j = 0; j < cfg.input_map.size(); ++j) {
                u_plant(cfg.input_map[j]) += u_now[li](static_cast<Eigen::Index>(j));
            }
            u_req_now[li] = report.u_req;
            u_now[li] = u_next;
            rec.loops.push_back(std::move(lr));
        }

        trace.steps.push_back(std::move(rec));
        if (k + 1 < settings.steps) {
            x = advance_plant(plant, x, u_plant, ts, settings.substeps);
        }
    }
    return trace;
}

} // namespace pcac
