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

#include <filesystem>
#include <fstream>
#include <string>

#include "liftlab/io.hpp"
#include "support/oracles.hpp"

namespace liftlab::io {
namespace {

Json minimal_config() {
    return Json::parse(R"({
        "journeys": ["S", "F", "O"],
        "overlap": {"proportions": {"none": 0.40, "S": 0.14, "F": 0.12, "F+S": 0.08,
                                    "O": 0.10, "O+S": 0.06, "F+O": 0.06, "F+O+S": 0.04}},
        "observed": {"onoff": {"S": {"lift": 0.03, "se": 0.004},
                               "F": {"lift": 0.02, "se": 0.004},
                               "O": {"lift": 0.02, "se": 0.004}}}
    })");
}

std::string config_error(const Json& doc) {
    try {
        parse_run_config(doc);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

TEST(ParseRunConfig, MinimalDefaults) {
    const auto cfg = parse_run_config(minimal_config());
    EXPECT_EQ(cfg.structure.journey_count(), 3U);
    EXPECT_EQ(cfg.structure.kappa_count(), 4U);
    EXPECT_EQ(cfg.overlap.mass, testing::reference_overlap().mass);
    EXPECT_FALSE(cfg.overlap_sample_size.has_value());
    EXPECT_FALSE(cfg.concentration().has_value());
    EXPECT_EQ(cfg.observed.pure_count(), 0U);
    EXPECT_FALSE(cfg.observed.global.has_value());
    EXPECT_EQ(cfg.hyper.lambda_inter, 0.30);
    EXPECT_EQ(cfg.hyper.w_pure, 0.20);
    EXPECT_EQ(cfg.mc_iterations, 5000);
}

TEST(ParseRunConfig, CountsNormalizeAndSetSampleSize) {
    auto doc = minimal_config();
    doc["overlap"] = Json::parse(R"({"counts": {"none": 600, "S": 300, "F+O+S": 100}})");
    const auto cfg = parse_run_config(doc);
    EXPECT_EQ(cfg.overlap.mass[0], 0.6);
    EXPECT_EQ(cfg.overlap.mass[1], 0.3);
    EXPECT_EQ(cfg.overlap.mass[7], 0.1);
    EXPECT_EQ(cfg.overlap.mass[2], 0.0);
    EXPECT_EQ(cfg.concentration(), 1000.0);
    doc["monte_carlo"] = Json{{"concentration", 50.0}};
    EXPECT_EQ(parse_run_config(doc).concentration(), 50.0);
}

TEST(ParseRunConfig, KeyOrderDoesNotMatter) {
    auto doc = minimal_config();
    doc["overlap"] = Json::parse(R"({"counts": {"none": 1, "S+F": 1}})");
    EXPECT_EQ(parse_run_config(doc).overlap.mass[3], 0.5);
}

TEST(ParseRunConfig, CountsBecomeDeltaMethodEstimates) {
    auto doc = minimal_config();
    doc["observed"]["pure"]["F"] =
        Json{{"n_treat", 100000}, {"m_treat", 1200}, {"n_ctrl", 100000}, {"m_ctrl", 1000}};
    const auto cfg = parse_run_config(doc);
    const auto est = estimate_lift({100000, 1200, 100000, 1000});
    ASSERT_TRUE(cfg.observed.pure[1].has_value());
    EXPECT_EQ(cfg.observed.pure[1]->value, est.lift);
    EXPECT_EQ(cfg.observed.pure[1]->se, est.se);
    EXPECT_FALSE(cfg.observed.pure[0].has_value());
}

TEST(ParseRunConfig, FieldLevelErrors) {
    auto doc = minimal_config();
    doc["observed"]["onoff"].erase("O");
    EXPECT_EQ(config_error(doc), "observed.onoff.O: missing ON/OFF lift for journey");

    doc = minimal_config();
    doc["observed"]["onoff"]["X"] = Json{{"lift", 0.0}, {"se", 0.0}};
    EXPECT_EQ(config_error(doc), "observed.onoff.X: unknown journey");

    doc = minimal_config();
    doc["bogus"] = 1;
    EXPECT_EQ(config_error(doc), "bogus: unknown field");

    doc = minimal_config();
    doc["observed"]["onoff"]["S"]["se"] = -0.1;
    EXPECT_EQ(config_error(doc), "observed.onoff.S.se: must be non-negative");

    doc = minimal_config();
    doc["observed"]["onoff"]["S"]["lift"] = -1.0;
    EXPECT_EQ(config_error(doc), "observed.onoff.S.lift: must exceed -1");

    doc = minimal_config();
    doc["overlap"]["proportions"]["none"] = 0.5;
    EXPECT_EQ(config_error(doc).rfind("overlap.proportions:", 0), 0U);

    doc = minimal_config();
    doc["overlap"]["proportions"]["S+X"] = 0.0;
    EXPECT_EQ(config_error(doc).rfind("overlap.proportions.S+X:", 0), 0U);

    doc = minimal_config();
    doc["journeys"] = Json::array({"S", "S"});
    EXPECT_EQ(config_error(doc).rfind("journeys:", 0), 0U);

    doc = minimal_config();
    doc["journeys"] = Json::array({"A", "B", "C", "D", "E"});
    EXPECT_EQ(config_error(doc).rfind("journeys:", 0), 0U);
    doc["max_journeys"] = 5;
    EXPECT_EQ(config_error(doc).rfind("overlap.proportions.", 0), 0U) << config_error(doc);

    doc = minimal_config();
    doc["schema_version"] = 2;
    EXPECT_EQ(config_error(doc), "schema_version: unsupported version");

    doc = minimal_config();
    doc["hyperparams"] = Json{{"lambda_inter", -1.0}};
    EXPECT_EQ(config_error(doc).rfind("hyperparams:", 0), 0U);

    doc = minimal_config();
    doc.erase("observed");
    EXPECT_EQ(config_error(doc), "observed: missing required field");
}

TEST(ParseRunConfig, ZeroControlConversionsIsZeroBaseline) {
    auto doc = minimal_config();
    doc["observed"]["onoff"]["S"] =
        Json{{"n_treat", 1000}, {"m_treat", 10}, {"n_ctrl", 1000}, {"m_ctrl", 0}};
    EXPECT_THROW(parse_run_config(doc), ZeroBaseline);
}

TEST(ParseWorldSpec, ReadsThetaAndDefaults) {
    const auto doc = Json::parse(R"({
        "journeys": ["S", "F"],
        "theta": {"f": {"F": 1.05, "S": 1.1}, "kappa": {"F+S": 1.01}},
        "overlap": {"proportions": {"none": 0.5, "S": 0.2, "F": 0.2, "F+S": 0.1}},
        "base_rate": 0.02,
        "seed": 9
    })");
    const auto spec = parse_world_spec(doc);
    EXPECT_EQ(spec.true_theta.f, (std::vector<double>{1.1, 1.05}));
    EXPECT_EQ(spec.true_theta.kappa, (std::vector<double>{1.01}));
    EXPECT_EQ(spec.cohort_size, 3000000U);
    EXPECT_EQ(spec.unmodeled_additive, 0.0);
    EXPECT_EQ(spec.seed, 9U);

    auto bad = doc;
    bad["theta"]["f"].erase("F");
    EXPECT_THROW(parse_world_spec(bad), ConfigError);
    bad = doc;
    bad["theta"]["kappa"]["S"] = 1.0;
    EXPECT_THROW(parse_world_spec(bad), ConfigError);
    bad = doc;
    bad["cohort_size"] = -5;
    EXPECT_THROW(parse_world_spec(bad), ConfigError);
}

TEST(WriteAtomic, ReplacesTargetAndLeavesNoTemporary) {
    const auto dir = std::filesystem::temp_directory_path() / "liftlab_io_test";
    std::filesystem::create_directories(dir);
    const auto target = dir / "out.json";
    write_atomic(target, "first\n");
    write_atomic(target, "second\n");
    std::ifstream in(target);
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "second");
    EXPECT_FALSE(std::filesystem::exists(dir / "out.json.tmp"));
    EXPECT_THROW(write_atomic(dir / "missing" / "x.json", "x"), Error);
    std::filesystem::remove_all(dir);
}

TEST(Reports, CarrySchemaVersion) {
    const auto s = testing::reference_structure();
    const FactorModel model(s);
    const auto obs = testing::lifts_from(model, testing::reference_overlap(),
                                         testing::reference_theta(), 0.004);
    const auto result = fit(model, testing::reference_overlap(), obs, {});
    const auto doc = fit_report(s, result, obs);
    EXPECT_EQ(doc.at("schema_version"), kSchemaVersion);
    EXPECT_EQ(doc.at("theta").at("kappa").begin().key(), "F+S");
    EXPECT_EQ(doc.at("derived").at("synergy").size(), 4U);
    const auto lift = lift_report(estimate_lift({10, 5, 10, 4}), {10, 5, 10, 4});
    EXPECT_EQ(lift.at("schema_version"), kSchemaVersion);
    EXPECT_EQ(lift.at("counts").at("m_ctrl"), 4);
}

TEST(GeneratedBundle, IsAValidRunConfig) {
    WorldSpec spec;
    spec.structure = testing::reference_structure();
    spec.true_theta = testing::reference_theta();
    spec.overlap = testing::reference_overlap();
    spec.base_rate = 0.02;
    spec.cohort_size = 200000;
    spec.seed = 31;
    const auto cohort = generate_cohort(spec);
    const auto bundle = run_virtual_experiments(cohort, 1);
    const auto doc = bundle_json(spec, bundle);
    const auto cfg = parse_run_config(doc);
    EXPECT_EQ(cfg.concentration(), 200000.0);
    EXPECT_EQ(cfg.observed.onoff.size(), 3U);
    EXPECT_EQ(cfg.observed.pure_count(), 3U);
    ASSERT_TRUE(cfg.observed.global.has_value());
    EXPECT_EQ(cfg.mc_seed, 31U);
    EXPECT_EQ(cfg.observed.global->value, estimate_lift(bundle.global).lift);
    // Parsing the dump again gives the same document.
    EXPECT_EQ(Json::parse(doc.dump()), doc);
}

}  // namespace
}  // namespace liftlab::io
