// Drives a single adaptive loop against a lightly damped second-order plant
// it knows nothing about, and prints the tracking error every second.

#include <pcac/pcac.hpp>

#include <cstdio>

int main()
{
    using pcac::Matrix;
    using pcac::Vector;

    const Vector one = Vector::Ones(1);
    pcac::PcacConfig cfg;
    cfg.dims = pcac::ArxDims{4, 1, 1};
    cfg.horizon = 30;
    cfg.weights = pcac::MpcWeights::diagonal(cfg.horizon, one, 10.0 * one, 0.05 * one, Matrix::Identity(1, 1));
    cfg.limits = pcac::SaturationLimits::symmetric(2.0 * one, 0.2 * one);
    cfg.output_map = {0};
    cfg.input_map = {0};

    // ẍ + 0.4ẋ + 4x = 4u, starting displaced so the controller has something to learn from.
    pcac::LtiPlant plant{(Matrix(2, 2) << 0.0, 1.0, -4.0, -0.4).finished(), (Matrix(2, 1) << 0.0, 4.0).finished(),
                         (Matrix(1, 2) << 1.0, 0.0).finished(), (Vector(2) << 0.5, 0.0).finished()};

    std::vector<pcac::LoopBinding> loops;
    loops.push_back({"pos", pcac::PcacController(cfg), {pcac::CommandTrajectory{{{0.0, 0.0}, {10.0, 0.0}, {15.0, 1.0}}}}});
    const auto trace = pcac::run_closed_loop(plant, {{"x"}, {"u"}, Vector::Zero(1)}, loops, {0.05, 600, 10});

    for (const auto& step : trace.steps) {
        if (step.k % 20 == 0) {
            const auto& l = step.loops.front();
            std::printf("t=%5.1f  r=%6.3f  y=%7.4f  u=%7.4f\n", step.t, l.r(0), l.yt(0), l.u(0));
        }
    }
    const auto m = pcac::compute_metrics(trace);
    std::printf("rms error %.4f, constraint margin %.4f\n", m.loops.front().rms_error, *m.constraint_margin);
    return 0;
}
