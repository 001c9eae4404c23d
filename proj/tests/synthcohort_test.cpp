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
#include <sstream>

#include "liftlab/experiment.hpp"
#include "liftlab/synthcohort.hpp"
#include "support/oracles.hpp"

namespace liftlab {
namespace {

WorldSpec two_segment_world(std::uint64_t cohort, std::uint64_t seed) {
    WorldSpec w;
    w.structure = ModelStructure(JourneySet({"S"}));
    w.true_theta = ModelParams{{1.2}, {}};
    w.overlap = OverlapDistribution{{0.5, 0.5}};
    w.base_rate = 0.01;
    w.cohort_size = cohort;
    w.seed = seed;
    return w;
}

WorldSpec reference_world(std::uint64_t cohort, std::uint64_t seed) {
    WorldSpec w;
    w.structure = testing::reference_structure();
    w.true_theta = testing::reference_theta();
    w.overlap = testing::reference_overlap();
    w.base_rate = 0.02;
    w.cohort_size = cohort;
    w.seed = seed;
    return w;
}

double z_score(const LiftEstimate& est, double expected) {
    return (est.lift - expected) / est.se;
}

TEST(WorldSpec, Validation) {
    auto w = two_segment_world(1000, 1);
    EXPECT_NO_THROW(w.validate());
    w.cohort_size = 0;
    EXPECT_THROW(generate_cohort(w), InvalidWorld);
    w = two_segment_world(1000, 1);
    w.base_rate = 0.9;  // 0.9 * 1.2 > 1
    EXPECT_THROW(w.validate(), InvalidWorld);
    w = two_segment_world(1000, 1);
    w.overlap = OverlapDistribution{{0.5, 0.4}};
    EXPECT_THROW(w.validate(), InvalidWorld);
}

TEST(GenerateCohort, MembershipFrequenciesMatchOverlap) {
    const auto w = reference_world(400000, 3);
    const auto cohort = generate_cohort(w, 2);
    const auto counts = cohort.combination_counts();
    for (std::size_t c = 0; c < counts.size(); ++c) {
        const double p = w.overlap.mass[c];
        const double se = std::sqrt(p * (1 - p) / 400000.0);
        EXPECT_NEAR(static_cast<double>(counts[c]) / 400000.0, p, 4 * se);
    }
}

TEST(GenerateCohort, DeterministicAcrossWorkers) {
    const auto w = reference_world(50000, 4);
    const auto a = generate_cohort(w, 1);
    const auto b = generate_cohort(w, 3);
    EXPECT_EQ(a.combination_counts(), b.combination_counts());
    const auto sc = Scenario::global(w.structure);
    EXPECT_EQ(virtual_experiment(a, sc, 1), virtual_experiment(b, sc, 4));
}

TEST(GenerateCohort, BranchBitIsSharedAcrossExperiments) {
    const auto w = reference_world(20000, 5);
    const auto cohort = generate_cohort(w);
    std::uint64_t treated = 0;
    for (std::uint64_t u = 0; u < cohort.size(); ++u) {
        treated += cohort.in_treatment(u) ? 1 : 0;
    }
    const ExperimentCounts g = virtual_experiment(cohort, Scenario::global(w.structure));
    for (std::size_t j = 0; j < 3; ++j) {
        const auto e = virtual_experiment(cohort, Scenario::onoff(w.structure, j));
        EXPECT_EQ(e.n_treat, treated);
        EXPECT_EQ(e.n_treat, g.n_treat);
    }
}

TEST(VirtualExperiment, NeutralWorldShowsNoLift) {
    auto w = reference_world(1000000, 6);
    w.true_theta = ModelParams::neutral(w.structure);
    const auto cohort = generate_cohort(w);
    const auto g = estimate_lift(virtual_experiment(cohort, Scenario::global(w.structure)));
    EXPECT_LT(std::abs(z_score(g, 0.0)), 3.0);
    const auto rates = conversion_rates(virtual_experiment(cohort, Scenario::onoff(w.structure, 1)));
    const double se = std::sqrt(0.02 * 0.98 / 500000.0 * 2);
    EXPECT_LT(std::abs(rates.p_treat - rates.p_ctrl), 3 * se);
}

TEST(VirtualExperiment, EmptyOverlapGivesIdenticalBranches) {
    auto w = reference_world(100000, 7);
    w.overlap = OverlapDistribution{{1, 0, 0, 0, 0, 0, 0, 0}};
    const auto cohort = generate_cohort(w);
    for (std::uint64_t u = 0; u < 1000; ++u) {
        const double p = cohort.conversion_probability(u, Scenario::global(w.structure));
        EXPECT_EQ(p, cohort.conversion_probability(u, Scenario::onoff(w.structure, 0)));
        EXPECT_EQ(p, 0.02);
    }
    const auto est = estimate_lift(virtual_experiment(cohort, Scenario::global(w.structure)));
    EXPECT_LT(std::abs(z_score(est, 0.0)), 3.0);
}

TEST(VirtualExperiment, TwoSegmentAttenuatedLift) {
    const auto w = two_segment_world(1000000, 8);
    const auto cohort = generate_cohort(w);
    const auto est = estimate_lift(virtual_experiment(cohort, Scenario::onoff(w.structure, 0)));
    // Half the base exposed to f = 1.2: (0.5 + 0.5 * 1.2) / 1 - 1.
    EXPECT_LT(std::abs(z_score(est, 0.10)), 3.0);
}

TEST(VirtualExperiment, MatchesModelPredictions) {
    const auto w = reference_world(2000000, 9);
    const auto cohort = generate_cohort(w);
    const FactorModel model(w.structure);
    for (std::size_t j = 0; j < 3; ++j) {
        const auto est = estimate_lift(virtual_experiment(cohort, Scenario::onoff(w.structure, j)));
        EXPECT_LT(std::abs(z_score(est, model.predicted_onoff_lift(j, w.overlap, w.true_theta))),
                  3.0);
        const auto pure = estimate_lift(virtual_experiment(cohort, Scenario::pure(w.structure, j)));
        EXPECT_LT(std::abs(z_score(pure, w.true_theta.f[j] - 1.0)), 3.0);
    }
    const auto g = estimate_lift(virtual_experiment(cohort, Scenario::global(w.structure)));
    EXPECT_LT(std::abs(z_score(g, model.predicted_global_lift(w.overlap, w.true_theta))), 3.0);
}

TEST(VirtualExperiment, UnmodeledAdditiveFollowsServiceChannel) {
    auto w = reference_world(200, 10);
    const auto plain = generate_cohort(w);
    w.unmodeled_additive = 0.004;
    const auto extra = generate_cohort(w);
    const auto g = Scenario::global(w.structure);
    const auto onoff = Scenario::onoff(w.structure, 0);
    for (std::uint64_t u = 0; u < extra.size(); ++u) {
        const double delta = extra.conversion_probability(u, g) - plain.conversion_probability(u, g);
        EXPECT_NEAR(delta, extra.in_treatment(u) ? 0.004 : 0.0, 1e-15);
        // Per-journey experiments keep the service channel on in both branches.
        EXPECT_NEAR(extra.conversion_probability(u, onoff) - plain.conversion_probability(u, onoff),
                    0.004, 1e-15);
    }
}

TEST(CohortCsv, HeaderAndRows) {
    const auto w = two_segment_world(5, 11);
    const auto cohort = generate_cohort(w);
    std::ostringstream out;
    write_cohort_csv(cohort, Scenario::global(w.structure), out);
    std::istringstream in(out.str());
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "user_id,combination,branch,converted");
    int rows = 0;
    while (std::getline(in, line)) ++rows;
    EXPECT_EQ(rows, 5);
}

TEST(EnumerationOracle, NoneOffEqualsOnExpectation) {
    const auto s = testing::reference_structure();
    const FactorModel model(s);
    EXPECT_NEAR(enumeration_oracle(s, testing::reference_overlap(), testing::reference_theta(), {}),
                model.expected_effect_on(testing::reference_overlap(), testing::reference_theta()),
                1e-15);
}

}  // namespace
}  // namespace liftlab
