#include "oracles.hpp"

#include <pcac/fstats.hpp>

#include <gtest/gtest.h>

#include <random>
#include <tuple>

TEST(IncompleteBeta, ZeroAtOrigin) { EXPECT_EQ(pcac::regularized_incomplete_beta(0.0, 2.0, 3.0), 0.0); }

TEST(IncompleteBeta, HalfOnSymmetricShape)
{
    for (double a : {0.5, 1.0, 3.0, 20.0}) {
        EXPECT_NEAR(pcac::regularized_incomplete_beta(0.5, a, a), 0.5, 1e-14);
    }
}

TEST(IncompleteBeta, MatchesQuadrature)
{
    EXPECT_NEAR(pcac::regularized_incomplete_beta(0.3, 2.0, 5.0), oracle::incomplete_beta(0.3, 2.0, 5.0), 1e-12);
    // Closed form for a = 2, b = 5 as a second check.
    const double x = 0.3;
    double closed = 0.0;
    for (int j = 2; j <= 6; ++j) {
        closed += std::tgamma(7) / (std::tgamma(j + 1) * std::tgamma(7 - j)) * std::pow(x, j) * std::pow(1 - x, 6 - j);
    }
    EXPECT_NEAR(pcac::regularized_incomplete_beta(x, 2.0, 5.0), closed, 1e-14);
}

TEST(IncompleteBeta, RejectsBadArguments)
{
    EXPECT_THROW(pcac::regularized_incomplete_beta(1.5, 1.0, 1.0), pcac::ConfigError);
    EXPECT_THROW(pcac::regularized_incomplete_beta(0.5, 0.0, 1.0), pcac::ConfigError);
}

TEST(FQuantile, MedianOfEqualDofIsOne)
{
    for (double d : {1.0, 4.0, 40.0, 300.0}) {
        EXPECT_NEAR(pcac::f_quantile(0.5, d, d), 1.0, 1e-12);
    }
}

TEST(FQuantile, KnownTableValue) { EXPECT_NEAR(pcac::f_quantile(0.95, 1, 10), 4.9646, 1e-4); }

TEST(FQuantile, ForgettingThresholdMatchesOracle)
{
    const double expected = oracle::f_quantile(0.999, 40, 200);
    EXPECT_NEAR(pcac::f_quantile(0.999, 40, 200) / expected, 1.0, 1e-6);
}

TEST(FQuantile, RoundTripThroughCdf)
{
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> prob(0.001, 0.999);
    std::uniform_int_distribution<int> dof(1, 300);
    for (int trial = 0; trial < 300; ++trial) {
        const double p = prob(rng);
        const double d1 = dof(rng);
        const double d2 = dof(rng);
        const double f = pcac::f_quantile(p, d1, d2);
        ASSERT_NEAR(pcac::f_cdf(f, d1, d2), p, 1e-8) << "p=" << p << " d1=" << d1 << " d2=" << d2;
    }
}

TEST(FQuantile, IncreasingInProbability)
{
    for (auto [d1, d2] : {std::pair{1.0, 1.0}, std::pair{5.0, 12.0}, std::pair{40.0, 200.0}}) {
        double prev = 0.0;
        for (double p = 0.01; p < 0.995; p += 0.01) {
            const double f = pcac::f_quantile(p, d1, d2);
            ASSERT_GT(f, prev);
            prev = f;
        }
    }
}

TEST(FQuantile, RejectsInvalidQuery)
{
    EXPECT_THROW(pcac::f_quantile(0.0, 1, 1), pcac::ConfigError);
    EXPECT_THROW(pcac::f_quantile(1.0, 1, 1), pcac::ConfigError);
    EXPECT_THROW(pcac::f_quantile(0.5, -1, 1), pcac::ConfigError);
}

class FQuantileGrid : public ::testing::TestWithParam<std::tuple<double, double, double>> {};

TEST_P(FQuantileGrid, MatchesQuadratureBisection)
{
    const auto [p, d1, d2] = GetParam();
    const double expected = oracle::f_quantile(p, d1, d2);
    EXPECT_NEAR(pcac::f_quantile(p, d1, d2) / expected, 1.0, 1e-6);
}

INSTANTIATE_TEST_SUITE_P(Grid, FQuantileGrid,
                         ::testing::Combine(::testing::Values(0.05, 0.5, 0.95, 0.999),
                                            ::testing::Values(1.0, 2.0, 40.0),
                                            ::testing::Values(1.0, 10.0, 200.0)));
