// Copyright 2026 The Liftlab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "liftlab/experiment.hpp"
#include "support/oracles.hpp"

namespace liftlab {
namespace {

const ExperimentCounts kFixture{100000, 1200, 100000, 1000};

TEST(ConversionRates, DirectDivision) {
    const auto r = conversion_rates(kFixture);
    EXPECT_DOUBLE_EQ(r.p_treat, 0.012);
    EXPECT_DOUBLE_EQ(r.p_ctrl, 0.010);
}

TEST(ConversionRates, ZeroAndFullConversion) {
    const auto zero = conversion_rates({10, 0, 10, 0});
    EXPECT_EQ(zero.p_treat, 0.0);
    EXPECT_EQ(zero.p_ctrl, 0.0);
    const auto full = conversion_rates({5, 5, 5, 5});
    EXPECT_EQ(full.p_treat, 1.0);
    EXPECT_EQ(full.p_ctrl, 1.0);
}

TEST(ConversionRates, RejectsInvalidCounts) {
    EXPECT_THROW(conversion_rates({0, 0, 10, 1}), InvalidInput);
    EXPECT_THROW(conversion_rates({10, 11, 10, 1}), InvalidInput);
    EXPECT_THROW(conversion_rates({10, 1, 10, 12}), InvalidInput);
}

TEST(RegressionCoefficients, GroupMeans) {
    const auto c = regression_coefficients(kFixture);
    EXPECT_DOUBLE_EQ(c.beta0, 0.010);
    EXPECT_NEAR(c.beta1, 0.002, 1e-15);
    EXPECT_EQ(regression_coefficients({1000, 50, 2000, 100}).beta1, 0.0);
}

TEST(RegressionCoefficients, CovarianceMatchesClosedFormAndBootstrap) {
    const auto c = regression_coefficients(kFixture);
    const double vc = 0.01 * 0.99 / 100000.0;
    const double vt = 0.012 * 0.988 / 100000.0;
    EXPECT_NEAR(c.cov.var0, vc, 1e-18);
    EXPECT_NEAR(c.cov.cov01, -vc, 1e-18);
    EXPECT_NEAR(c.cov.var1, vt + vc, 1e-18);
    EXPECT_GE(c.cov.determinant(), -kPsdTolerance);

    const auto boot = testing::bootstrap_coef_cov(kFixture, 10000, 17);
    EXPECT_NEAR(boot.var0 / c.cov.var0, 1.0, 0.05);
    EXPECT_NEAR(boot.cov01 / c.cov.cov01, 1.0, 0.05);
    EXPECT_NEAR(boot.var1 / c.cov.var1, 1.0, 0.05);
}

TEST(DeltaMethod, ZeroNumerator) {
    RegressionCoefficients c{0.05, 0.0, {1e-6, -1e-6, 3e-6}};
    EXPECT_EQ(delta_method_lift(c).lift, 0.0);
}

TEST(DeltaMethod, DegenerateCovariance) {
    const auto est = delta_method_lift({0.01, 0.002, {0.0, 0.0, 0.0}});
    EXPECT_NEAR(est.lift, 0.20, 1e-15);
    EXPECT_EQ(est.se, 0.0);
    EXPECT_EQ(est.ci_low, est.lift);
    EXPECT_EQ(est.ci_high, est.lift);
}

TEST(DeltaMethod, Errors) {
    EXPECT_THROW(delta_method_lift({0.0, 0.01, {1e-6, 0, 1e-6}}), ZeroBaseline);
    // Indefinite matrix gives a negative quadratic form along g.
    EXPECT_THROW(delta_method_lift({0.01, 0.002, {1e-4, 0.0, -1e-4}}), NegativeVariance);
}

TEST(EstimateLift, FixtureAgainstBootstrap) {
    const auto est = estimate_lift(kFixture);
    EXPECT_EQ(est.lift, 0.2);
    const double boot = testing::bootstrap_lift_se(kFixture, 10000, 2024);
    EXPECT_NEAR(est.se / boot, 1.0, 0.05);
    EXPECT_NEAR(est.ci_high - est.ci_low, 2 * kZ95 * est.se, 1e-15);
}

TEST(EstimateLift, EqualRatesAndZeroBaseline) {
    EXPECT_EQ(estimate_lift({5000, 100, 5000, 100}).lift, 0.0);
    EXPECT_THROW(estimate_lift({10, 3, 10, 0}), ZeroBaseline);
}

TEST(EstimateLiftProperty, ScaleInvariance) {
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<std::uint64_t> n(2000, 50000);
    std::uniform_real_distribution<double> rate(0.01, 0.2);
    for (int trial = 0; trial < 200; ++trial) {
        ExperimentCounts c;
        c.n_treat = n(rng);
        c.n_ctrl = n(rng);
        c.m_treat = static_cast<std::uint64_t>(rate(rng) * static_cast<double>(c.n_treat));
        c.m_ctrl = static_cast<std::uint64_t>(rate(rng) * static_cast<double>(c.n_ctrl));
        const auto base = estimate_lift(c);
        for (std::uint64_t k : {4U, 9U, 25U}) {
            const auto scaled = estimate_lift({c.n_treat * k, c.m_treat * k, c.n_ctrl * k,
                                               c.m_ctrl * k});
            EXPECT_NEAR(scaled.lift, base.lift, 1e-12 * std::max(1.0, std::abs(base.lift)));
            EXPECT_NEAR(scaled.se * std::sqrt(static_cast<double>(k)) / base.se, 1.0, 0.01);
        }
    }
}

TEST(EstimateLiftProperty, BranchSwapAntisymmetry) {
    std::mt19937_64 rng(6);
    std::uniform_int_distribution<std::uint64_t> n(100, 100000);
    for (int trial = 0; trial < 500; ++trial) {
        ExperimentCounts c{n(rng), 0, n(rng), 0};
        c.m_treat = 1 + rng() % c.n_treat;
        c.m_ctrl = 1 + rng() % c.n_ctrl;
        const double forward = estimate_lift(c).lift;
        const double backward = estimate_lift(c.swapped()).lift;
        EXPECT_NEAR(backward, 1.0 / (1.0 + forward) - 1.0, 1e-12 * (1.0 + std::abs(backward)));
    }
}

TEST(EstimateLiftProperty, InvariantsHold) {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 500; ++trial) {
        ExperimentCounts c{1 + rng() % 100000, 0, 1 + rng() % 100000, 0};
        c.m_treat = rng() % (c.n_treat + 1);
        c.m_ctrl = 1 + rng() % c.n_ctrl;
        const auto est = estimate_lift(c);
        EXPECT_GE(est.se, 0.0);
        EXPECT_LE(est.ci_low, est.lift);
        EXPECT_GE(est.ci_high, est.lift);
        EXPECT_NEAR(est.ci_high - est.ci_low, 2 * kZ95 * est.se, 1e-9 * (1 + est.se));
    }
}

TEST(EstimateLiftProperty, DeltaSeAgreesWithBootstrapWhenCountsLarge) {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 5; ++trial) {
        ExperimentCounts c{20000 + rng() % 80000, 0, 20000 + rng() % 80000, 0};
        c.m_treat = 50 + rng() % 2000;
        c.m_ctrl = 50 + rng() % 2000;
        const double boot = testing::bootstrap_lift_se(c, 10000, 100 + trial);
        EXPECT_NEAR(estimate_lift(c).se / boot, 1.0, 0.05) << "trial " << trial;
    }
}

}  // namespace
}  // namespace liftlab
