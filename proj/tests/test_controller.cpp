#include "oracles.hpp"

#include <pcac/controller.hpp>

#include <gtest/gtest.h>

#include <random>

using pcac::ArxDims;
using pcac::Matrix;
using pcac::PcacConfig;
using pcac::PcacController;
using pcac::SaturationLimits;
using pcac::Vector;

namespace {

Vector v1(double x) { return Vector::Constant(1, x); }

PcacConfig altitude_loop_config()
{
    PcacConfig cfg;
    cfg.dims = ArxDims{6, 1, 2};
    cfg.horizon = 40;
    cfg.weights = pcac::MpcWeights::diagonal(40, v1(0.1), v1(0.1), v1(0.1), (Matrix(1, 2) << 1.0, 0.0).finished());
    cfg.limits = SaturationLimits::symmetric(v1(10.0), v1(0.5));
    cfg.theta0_scale = 0.01;
    cfg.psi0_scale = 1e5;
    return cfg;
}

PcacConfig siso_config(int order, int horizon)
{
    PcacConfig cfg;
    cfg.dims = ArxDims{order, 1, 1};
    cfg.horizon = horizon;
    cfg.weights = pcac::MpcWeights::diagonal(horizon, v1(1.0), v1(1.0), v1(0.05), Matrix::Identity(1, 1));
    cfg.limits = SaturationLimits::symmetric(v1(5.0), v1(1.0));
    return cfg;
}

} // namespace

TEST(PcacConfig, InitialEstimateShape)
{
    PcacController c(altitude_loop_config());
    EXPECT_EQ(c.estimate().theta.size(), 36);
    EXPECT_EQ(c.estimate().theta, Vector::Constant(36, 0.01));
    EXPECT_EQ(c.estimate().psi, 1e5 * Matrix::Identity(36, 36));

    auto cfg = altitude_loop_config();
    cfg.dims.order = 10;
    cfg.psi0_scale = 1e4;
    EXPECT_EQ(PcacController(cfg).estimate().theta.size(), 60);
    EXPECT_EQ(PcacController(siso_config(1, 3)).estimate().theta.size(), 2);
}

TEST(PcacConfig, Validation)
{
    auto cfg = siso_config(2, 5);
    cfg.horizon = 0;
    EXPECT_THROW(PcacController{cfg}, std::invalid_argument);
    cfg = siso_config(2, 5);
    cfg.psi0_scale = 0.0;
    EXPECT_THROW(PcacController{cfg}, pcac::ConfigError);
    cfg = siso_config(2, 5);
    cfg.limits = SaturationLimits::symmetric(Vector::Ones(2), Vector::Ones(2));
    EXPECT_THROW(PcacController{cfg}, pcac::DimensionError);
    cfg = siso_config(2, 5);
    cfg.input_map = {0, 0};
    EXPECT_THROW(PcacController{cfg}, pcac::DimensionError);
}

TEST(PcacController, ZeroSignalsGiveZeroRequest)
{
    PcacController c(altitude_loop_config());
    for (int k = 0; k < 5; ++k) {
        const auto rep = c.step(Vector::Zero(2), Vector::Zero(40));
        EXPECT_EQ(rep.u_req, Vector::Zero(1));
        EXPECT_TRUE(rep.zero_move_feasible);
        EXPECT_LE(rep.kkt.max(), 1e-8);
        c.report_implemented(rep.u_req);
    }
}

TEST(PcacController, ColdStartRequestWithinMagnitudeBounds)
{
    PcacController c(altitude_loop_config());
    const auto rep = c.step((Vector(2) << 3.0, -1.0).finished(), Vector::Constant(40, 50.0));
    EXPECT_LE(std::abs(rep.u_req(0)), 10.0);
}

TEST(PcacController, FrozenModelMatchesStandaloneMpc)
{
    std::mt19937_64 rng(19);
    const auto sys = oracle::Arx::random(2, 1, 1, 0.3, rng);
    auto cfg = siso_config(2, 8);
    cfg.initial_theta = sys.pack();
    cfg.psi0_scale = 1e-14;
    PcacController c(cfg);

    std::vector<Vector> ys;
    std::vector<Vector> us;
    Vector u = Vector::Zero(1);
    c.report_implemented(u);
    const Vector preview = Vector::Ones(8);
    for (int k = 0; k < 15; ++k) {
        const Vector y = sys.predict(ys, us, k);
        // Standalone: reconstruct from the recorded history and solve directly.
        pcac::IoHistory h(cfg.dims);
        for (int i = std::max(0, k - 2); i < k; ++i) {
            h.push(ys[i], us[i]);
        }
        const auto model = pcac::realize(sys.pack(), cfg.dims);
        const auto x = pcac::reconstruct_state(h, y, sys.pack());
        const Vector x1 = model.A * x.x + model.B * u;
        const auto prob =
            pcac::assemble_qp(pcac::build_prediction(model, 8), x1, preview, cfg.weights, cfg.limits, u);
        const Vector expected = pcac::first_control(pcac::solve_mpc(prob), 1);

        const auto rep = c.step(y, preview);
        ASSERT_NEAR(rep.u_req(0), expected(0), 1e-8) << "k " << k;
        ys.push_back(y);
        us.push_back(u);
        u = pcac::apply_actuation(rep.u_req, u, cfg.limits);
        c.report_implemented(u);
    }
}

TEST(PcacController, DeterministicControlStream)
{
    auto run = [] {
        auto cfg = siso_config(3, 10);
        cfg.dither = pcac::DitherConfig{0.1, 20, 77};
        PcacController c(cfg);
        std::vector<double> out;
        Vector u = Vector::Zero(1);
        double y = 0.0;
        for (int k = 0; k < 60; ++k) {
            const auto rep = c.step(v1(y), Vector::Constant(10, 1.0));
            u = pcac::apply_actuation(rep.u_req, u, cfg.limits);
            c.report_implemented(u);
            y = 0.8 * y + 0.5 * u(0);
            out.push_back(rep.u_req(0));
        }
        return out;
    };
    EXPECT_EQ(run(), run());
}

TEST(PcacController, StepWithoutReportIsProtocolError)
{
    PcacController c(siso_config(1, 3));
    (void)c.step(v1(0.0), Vector::Zero(3));
    EXPECT_THROW((void)c.step(v1(0.0), Vector::Zero(3)), std::logic_error);
}

TEST(PcacController, NonFiniteMeasurementRaises)
{
    PcacController c(siso_config(1, 3));
    EXPECT_THROW((void)c.step(v1(std::nan("")), Vector::Zero(3)), pcac::NumericalError);
}

TEST(PcacController, WrongPreviewLengthRaises)
{
    PcacController c(siso_config(1, 3));
    EXPECT_THROW((void)c.step(v1(0.0), Vector::Zero(2)), pcac::DimensionError);
}

// Plant inside the model class, no forgetting: identification and tracking errors vanish.
TEST(PcacController, ConvergesOnPlantInsideModelClass)
{
    const auto cfg = [] {
        auto c = siso_config(2, 15);
        c.dither = pcac::DitherConfig{0.2, 30, 3};
        return c;
    }();
    oracle::Arx plant;
    plant.F = {Matrix::Constant(1, 1, -1.2), Matrix::Constant(1, 1, 0.35)};
    plant.G = {Matrix::Constant(1, 1, 0.5), Matrix::Constant(1, 1, 0.2)};
    PcacController c(cfg);
    std::vector<Vector> ys;
    std::vector<Vector> us;
    Vector u = Vector::Zero(1);
    c.report_implemented(u);
    double last_err = 0.0;
    double last_id = 0.0;
    for (int k = 0; k < 400; ++k) {
        const Vector y = plant.predict(ys, us, k);
        const auto rep = c.step(y, Vector::Ones(15));
        ys.push_back(y);
        us.push_back(u);
        u = pcac::apply_actuation(rep.u_req, u, cfg.limits);
        c.report_implemented(u);
        last_err = std::abs(y(0) - 1.0);
        last_id = rep.identification_error.norm();
    }
    EXPECT_LT(last_err, 1e-3);
    EXPECT_LT(last_id, 1e-6);
}
