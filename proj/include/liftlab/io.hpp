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

#pragma once

// JSON configuration and report documents, CSV traces, atomic file output.
//
// Combination keys are member labels sorted and joined by '+', with "none"
// for the empty combination. Every emitted document carries schema_version.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "json.hpp"

#include "liftlab/errors.hpp"
#include "liftlab/estimator.hpp"
#include "liftlab/experiment.hpp"
#include "liftlab/factor_model.hpp"
#include "liftlab/montecarlo.hpp"
#include "liftlab/synthcohort.hpp"

namespace liftlab::io {

using Json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

/// Configuration document failed validation; what() names the offending field.
class ConfigError : public InvalidInput {
public:
    ConfigError(const std::string& field, const std::string& message)
        : InvalidInput(field + ": " + message) {}
};

struct RunConfig {
    ModelStructure structure;
    OverlapDistribution overlap;
    std::optional<double> overlap_sample_size;  // total count behind the proportions
    ObservedLifts observed;
    Hyperparams hyper;
    FitConfig fit;
    int mc_iterations = 5000;
    std::optional<std::uint64_t> mc_seed;
    std::optional<double> mc_concentration;
    bool mc_cold_start = false;

    /// Dirichlet concentration: explicit value, else the overlap sample size.
    [[nodiscard]] std::optional<double> concentration() const {
        return mc_concentration ? mc_concentration : overlap_sample_size;
    }
};

namespace detail {

inline const Json& require(const Json& obj, const std::string& key, const std::string& path) {
    if (!obj.is_object()) {
        throw ConfigError(path, "expected an object");
    }
    const auto it = obj.find(key);
    if (it == obj.end()) {
        throw ConfigError(path.empty() ? key : path + "." + key, "missing required field");
    }
    return *it;
}

inline void reject_unknown(const Json& obj, std::initializer_list<const char*> allowed,
                           const std::string& path) {
    for (const auto& [key, value] : obj.items()) {
        bool known = false;
        for (const char* a : allowed) {
            known = known || key == a;
        }
        if (!known) {
            throw ConfigError(path.empty() ? key : path + "." + key, "unknown field");
        }
    }
}

inline double number(const Json& v, const std::string& path) {
    if (!v.is_number()) {
        throw ConfigError(path, "expected a number");
    }
    return v.get<double>();
}

inline std::uint64_t count(const Json& v, const std::string& path) {
    if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() &&
                                   v.get<std::int64_t>() < 0)) {
        throw ConfigError(path, "expected a non-negative integer");
    }
    return v.get<std::uint64_t>();
}

inline std::string join(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
}

inline void check_schema_version(const Json& doc) {
    if (const auto it = doc.find("schema_version"); it != doc.end()) {
        if (!it->is_number_integer() || it->get<int>() != kSchemaVersion) {
            throw ConfigError("schema_version", "unsupported version");
        }
    }
}

inline JourneySet parse_journeys(const Json& doc) {
    const Json& list = require(doc, "journeys", "");
    if (!list.is_array()) {
        throw ConfigError("journeys", "expected an array of labels");
    }
    std::vector<std::string> labels;
    for (const auto& item : list) {
        if (!item.is_string()) {
            throw ConfigError("journeys", "labels must be strings");
        }
        labels.push_back(item.get<std::string>());
    }
    std::size_t max_journeys = kDefaultMaxJourneys;
    if (const auto it = doc.find("max_journeys"); it != doc.end()) {
        max_journeys = static_cast<std::size_t>(count(*it, "max_journeys"));
    }
    try {
        return JourneySet(std::move(labels), max_journeys);
    } catch (const InvalidInput& e) {
        throw ConfigError("journeys", e.what());
    }
}

inline ModelStructure parse_structure(const Json& doc) {
    JourneySet journeys = parse_journeys(doc);
    std::size_t order = 0;
    if (const auto it = doc.find("interaction_order"); it != doc.end()) {
        order = static_cast<std::size_t>(count(*it, "interaction_order"));
        if (order < 1) {
            throw ConfigError("interaction_order", "must be at least 1");
        }
    }
    return ModelStructure(std::move(journeys), order);
}

/// Per-combination values keyed by combination key; absent keys are zero.
inline std::vector<double> parse_combination_map(const Json& obj, const JourneySet& journeys,
                                                 const std::string& path) {
    if (!obj.is_object()) {
        throw ConfigError(path, "expected an object keyed by combination");
    }
    std::vector<double> values(journeys.combination_count(), 0.0);
    std::vector<bool> seen(values.size(), false);
    for (const auto& [key, value] : obj.items()) {
        Combination c;
        try {
            c = journeys.parse_key(key);
        } catch (const InvalidInput& e) {
            throw ConfigError(join(path, key), e.what());
        }
        if (seen[c.bits]) {
            throw ConfigError(join(path, key), "combination listed twice");
        }
        seen[c.bits] = true;
        values[c.bits] = number(value, join(path, key));
        if (!(values[c.bits] >= 0.0)) {
            throw ConfigError(join(path, key), "must be non-negative");
        }
    }
    return values;
}

inline void parse_overlap(const Json& doc, const JourneySet& journeys, RunConfig& cfg) {
    const Json& ov = require(doc, "overlap", "");
    reject_unknown(ov, {"counts", "proportions", "sample_size"}, "overlap");
    const bool has_counts = ov.contains("counts");
    const bool has_props = ov.contains("proportions");
    if (has_counts == has_props) {
        throw ConfigError("overlap", "give exactly one of 'counts' or 'proportions'");
    }
    if (has_counts) {
        const auto counts = parse_combination_map(ov.at("counts"), journeys, "overlap.counts");
        try {
            cfg.overlap = OverlapDistribution::from_counts(counts);
        } catch (const InvalidInput& e) {
            throw ConfigError("overlap.counts", e.what());
        }
        double total = 0.0;
        for (double c : counts) {
            total += c;
        }
        cfg.overlap_sample_size = total;
    } else {
        cfg.overlap.mass =
            parse_combination_map(ov.at("proportions"), journeys, "overlap.proportions");
        try {
            cfg.overlap.validate(journeys.combination_count());
        } catch (const InvalidInput& e) {
            throw ConfigError("overlap.proportions", e.what());
        }
    }
    if (const auto it = ov.find("sample_size"); it != ov.end()) {
        cfg.overlap_sample_size = number(*it, "overlap.sample_size");
        if (!(*cfg.overlap_sample_size > 0.0)) {
            throw ConfigError("overlap.sample_size", "must be positive");
        }
    }
}

inline ExperimentCounts parse_counts(const Json& obj, const std::string& path) {
    reject_unknown(obj, {"n_treat", "m_treat", "n_ctrl", "m_ctrl"}, path);
    ExperimentCounts c{count(require(obj, "n_treat", path), join(path, "n_treat")),
                       count(require(obj, "m_treat", path), join(path, "m_treat")),
                       count(require(obj, "n_ctrl", path), join(path, "n_ctrl")),
                       count(require(obj, "m_ctrl", path), join(path, "m_ctrl"))};
    try {
        c.validate();
    } catch (const InvalidInput& e) {
        throw ConfigError(path, e.what());
    }
    return c;
}

/// Either {"lift", "se"} or raw branch counts turned into a delta-method estimate.
inline Measurement parse_measurement(const Json& obj, const std::string& path) {
    if (!obj.is_object()) {
        throw ConfigError(path, "expected an object");
    }
    if (obj.contains("n_treat")) {
        const LiftEstimate est = estimate_lift(parse_counts(obj, path));
        return {est.lift, est.se};
    }
    reject_unknown(obj, {"lift", "se"}, path);
    Measurement m{number(require(obj, "lift", path), join(path, "lift")),
                  number(require(obj, "se", path), join(path, "se"))};
    if (m.se < 0.0) {
        throw ConfigError(join(path, "se"), "must be non-negative");
    }
    if (m.value <= -1.0) {
        throw ConfigError(join(path, "lift"), "must exceed -1");
    }
    return m;
}

inline ObservedLifts parse_observed(const Json& doc, const JourneySet& journeys) {
    const Json& obs = require(doc, "observed", "");
    reject_unknown(obs, {"onoff", "pure", "global"}, "observed");
    ObservedLifts out;
    const Json& onoff = require(obs, "onoff", "observed");
    if (!onoff.is_object()) {
        throw ConfigError("observed.onoff", "expected an object keyed by journey");
    }
    for (const auto& [key, value] : onoff.items()) {
        if (!journeys.index_of(key)) {
            throw ConfigError("observed.onoff." + key, "unknown journey");
        }
    }
    for (const auto& label : journeys.labels()) {
        const std::string path = "observed.onoff." + label;
        if (!onoff.contains(label)) {
            throw ConfigError(path, "missing ON/OFF lift for journey");
        }
        out.onoff.push_back(parse_measurement(onoff.at(label), path));
    }
    out.pure.assign(journeys.size(), std::nullopt);
    if (const auto it = obs.find("pure"); it != obs.end()) {
        if (!it->is_object()) {
            throw ConfigError("observed.pure", "expected an object keyed by journey");
        }
        for (const auto& [key, value] : it->items()) {
            const auto idx = journeys.index_of(key);
            if (!idx) {
                throw ConfigError("observed.pure." + key, "unknown journey");
            }
            out.pure[*idx] = parse_measurement(value, "observed.pure." + key);
        }
    }
    if (const auto it = obs.find("global"); it != obs.end()) {
        out.global = parse_measurement(*it, "observed.global");
    }
    return out;
}

}  // namespace detail

inline RunConfig parse_run_config(const Json& doc) {
    if (!doc.is_object()) {
        throw ConfigError("$", "configuration must be a JSON object");
    }
    detail::reject_unknown(doc,
                           {"schema_version", "kind", "description", "journeys", "max_journeys",
                            "interaction_order", "overlap", "observed", "hyperparams", "fit",
                            "monte_carlo", "truth"},
                           "");
    detail::check_schema_version(doc);
    RunConfig cfg;
    cfg.structure = detail::parse_structure(doc);
    const JourneySet& journeys = cfg.structure.journeys();
    detail::parse_overlap(doc, journeys, cfg);
    cfg.observed = detail::parse_observed(doc, journeys);

    if (const auto it = doc.find("hyperparams"); it != doc.end()) {
        detail::reject_unknown(*it, {"lambda_inter", "w_pure"}, "hyperparams");
        if (it->contains("lambda_inter")) {
            cfg.hyper.lambda_inter =
                detail::number(it->at("lambda_inter"), "hyperparams.lambda_inter");
        }
        if (it->contains("w_pure")) {
            cfg.hyper.w_pure = detail::number(it->at("w_pure"), "hyperparams.w_pure");
        }
        try {
            cfg.hyper.validate();
        } catch (const InvalidInput& e) {
            throw ConfigError("hyperparams", e.what());
        }
    }
    if (const auto it = doc.find("fit"); it != doc.end()) {
        detail::reject_unknown(*it, {"max_iterations", "gradient_tolerance", "step_tolerance"},
                               "fit");
        if (it->contains("max_iterations")) {
            cfg.fit.max_iterations = static_cast<int>(
                detail::count(it->at("max_iterations"), "fit.max_iterations"));
        }
        if (it->contains("gradient_tolerance")) {
            cfg.fit.gradient_tolerance =
                detail::number(it->at("gradient_tolerance"), "fit.gradient_tolerance");
        }
        if (it->contains("step_tolerance")) {
            cfg.fit.step_tolerance =
                detail::number(it->at("step_tolerance"), "fit.step_tolerance");
        }
        try {
            cfg.fit.validate();
        } catch (const InvalidInput& e) {
            throw ConfigError("fit", e.what());
        }
    }
    if (const auto it = doc.find("monte_carlo"); it != doc.end()) {
        detail::reject_unknown(*it, {"iterations", "seed", "concentration", "cold_start"},
                               "monte_carlo");
        if (it->contains("iterations")) {
            cfg.mc_iterations = static_cast<int>(
                detail::count(it->at("iterations"), "monte_carlo.iterations"));
            if (cfg.mc_iterations < 1) {
                throw ConfigError("monte_carlo.iterations", "must be at least 1");
            }
        }
        if (it->contains("seed")) {
            cfg.mc_seed = detail::count(it->at("seed"), "monte_carlo.seed");
        }
        if (it->contains("concentration")) {
            cfg.mc_concentration =
                detail::number(it->at("concentration"), "monte_carlo.concentration");
            if (!(*cfg.mc_concentration > 0.0)) {
                throw ConfigError("monte_carlo.concentration", "must be positive");
            }
        }
        if (it->contains("cold_start")) {
            if (!it->at("cold_start").is_boolean()) {
                throw ConfigError("monte_carlo.cold_start", "expected a boolean");
            }
            cfg.mc_cold_start = it->at("cold_start").get<bool>();
        }
    }
    return cfg;
}

inline WorldSpec parse_world_spec(const Json& doc) {
    if (!doc.is_object()) {
        throw ConfigError("$", "world spec must be a JSON object");
    }
    detail::reject_unknown(doc,
                           {"schema_version", "kind", "description", "journeys", "max_journeys",
                            "interaction_order", "theta", "overlap", "base_rate", "cohort_size",
                            "seed", "unmodeled_additive"},
                           "");
    detail::check_schema_version(doc);
    WorldSpec spec;
    spec.structure = detail::parse_structure(doc);
    const JourneySet& journeys = spec.structure.journeys();

    spec.true_theta = ModelParams::neutral(spec.structure);
    const Json& theta = detail::require(doc, "theta", "");
    detail::reject_unknown(theta, {"f", "kappa"}, "theta");
    const Json& f = detail::require(theta, "f", "theta");
    for (const auto& [key, value] : f.items()) {
        const auto idx = journeys.index_of(key);
        if (!idx) {
            throw ConfigError("theta.f." + key, "unknown journey");
        }
        spec.true_theta.f[*idx] = detail::number(value, "theta.f." + key);
    }
    for (const auto& label : journeys.labels()) {
        if (!f.contains(label)) {
            throw ConfigError("theta.f." + label, "missing journey factor");
        }
    }
    if (const auto it = theta.find("kappa"); it != theta.end()) {
        const auto& subsets = spec.structure.kappa_subsets();
        for (const auto& [key, value] : it->items()) {
            Combination c;
            try {
                c = journeys.parse_key(key);
            } catch (const InvalidInput& e) {
                throw ConfigError("theta.kappa." + key, e.what());
            }
            const auto pos = std::find(subsets.begin(), subsets.end(), c);
            if (pos == subsets.end()) {
                throw ConfigError("theta.kappa." + key, "not an interaction subset of the model");
            }
            spec.true_theta.kappa[static_cast<std::size_t>(pos - subsets.begin())] =
                detail::number(value, "theta.kappa." + key);
        }
    }
    try {
        spec.true_theta.validate(spec.structure);
    } catch (const InvalidInput& e) {
        throw ConfigError("theta", e.what());
    }

    RunConfig scratch;
    detail::parse_overlap(doc, journeys, scratch);
    spec.overlap = scratch.overlap;

    spec.base_rate = detail::number(detail::require(doc, "base_rate", ""), "base_rate");
    if (const auto it = doc.find("cohort_size"); it != doc.end()) {
        spec.cohort_size = detail::count(*it, "cohort_size");
    }
    spec.seed = detail::count(detail::require(doc, "seed", ""), "seed");
    if (const auto it = doc.find("unmodeled_additive"); it != doc.end()) {
        spec.unmodeled_additive = detail::number(*it, "unmodeled_additive");
    }
    return spec;
}

inline Json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError(path.string(), "cannot open file");
    }
    try {
        return Json::parse(in);
    } catch (const Json::parse_error& e) {
        throw ConfigError(path.string(), std::string("invalid JSON: ") + e.what());
    }
}

/// Writes to a sibling temporary file, then renames it over the target.
inline void write_atomic(const std::filesystem::path& path, const std::string& content) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw Error("cannot open " + tmp.string() + " for writing");
        }
        out << content;
        out.flush();
        if (!out) {
            throw Error("failed writing " + tmp.string());
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp);
        throw Error("cannot rename " + tmp.string() + " to " + path.string() + ": " +
                    ec.message());
    }
}

inline Json to_json(const ExperimentCounts& c) {
    return Json{{"n_treat", c.n_treat}, {"m_treat", c.m_treat},
                {"n_ctrl", c.n_ctrl},   {"m_ctrl", c.m_ctrl}};
}

inline Json lift_report(const LiftEstimate& est, const ExperimentCounts& counts) {
    return Json{{"schema_version", kSchemaVersion},
                {"kind", "lift"},
                {"counts", to_json(counts)},
                {"lift", est.lift},
                {"se", est.se},
                {"ci_low", est.ci_low},
                {"ci_high", est.ci_high}};
}

inline Json theta_json(const ModelStructure& s, const ModelParams& theta) {
    Json f = Json::object();
    for (std::size_t j = 0; j < s.journey_count(); ++j) {
        f[s.journeys().label(j)] = theta.f[j];
    }
    Json kappa = Json::object();
    for (std::size_t k = 0; k < s.kappa_count(); ++k) {
        kappa[s.journeys().key(s.kappa_subsets()[k])] = theta.kappa[k];
    }
    return Json{{"f", f}, {"kappa", kappa}};
}

inline Json derived_json(const ModelStructure& s, const DerivedQuantities& d) {
    Json pure = Json::object();
    Json onoff = Json::object();
    for (std::size_t j = 0; j < s.journey_count(); ++j) {
        pure[s.journeys().label(j)] = d.pure_lifts[j];
        onoff[s.journeys().label(j)] = d.onoff_lifts[j];
    }
    Json synergy = Json::object();
    for (std::size_t k = 0; k < s.kappa_count(); ++k) {
        synergy[s.journeys().key(s.kappa_subsets()[k])] = d.synergies[k];
    }
    return Json{{"pure_lift", pure},
                {"synergy", synergy},
                {"onoff_lift", onoff},
                {"global_lift", d.global_lift}};
}

inline Json fit_report(const ModelStructure& s, const FitResult& r, const ObservedLifts& obs) {
    Json doc{{"schema_version", kSchemaVersion},
             {"kind", "fit_result"},
             {"journeys", s.journeys().labels()},
             {"converged", r.converged},
             {"termination", to_string(r.termination)},
             {"iterations", r.iterations},
             {"objective_value", r.objective_value},
             {"theta", theta_json(s, r.theta)},
             {"derived", derived_json(s, r.derived)},
             {"residuals", r.residuals},
             {"warnings", r.warnings}};
    if (obs.global) {
        doc["observed_global_lift"] = Json{{"lift", obs.global->value}, {"se", obs.global->se}};
    }
    return doc;
}

inline Json summary_json(const QuantitySummary& q) {
    return Json{{"mean", q.mean},   {"median", q.median}, {"p2.5", q.p2_5},
                {"p25", q.p25},     {"p75", q.p75},       {"p97.5", q.p97_5}};
}

inline Json mc_report(const ModelStructure& s, const McResult& r, const McConfig& mc) {
    Json params = Json::object();
    for (const auto& q : r.summary.parameters) {
        params[q.name] = summary_json(q);
    }
    Json derived = Json::object();
    for (const auto& q : r.summary.derived) {
        derived[q.name] = summary_json(q);
    }
    return Json{{"schema_version", kSchemaVersion},
                {"kind", "mc_summary"},
                {"journeys", s.journeys().labels()},
                {"seed", mc.seed},
                {"iterations", r.summary.iterations},
                {"converged", r.summary.converged},
                {"failures", r.summary.failures},
                {"dirichlet_concentration", mc.dirichlet_concentration},
                {"cold_start", mc.cold_start},
                {"point_estimate", Json{{"theta", theta_json(s, r.point_fit.theta)},
                                        {"derived", derived_json(s, r.point_fit.derived)},
                                        {"converged", r.point_fit.converged}}},
                {"parameters", params},
                {"derived", derived}};
}

/// CSV with header iteration,converged,<quantity columns>; failed fits leave
/// quantity cells empty.
inline std::string trace_csv(const McResult& r) {
    std::ostringstream out;
    out.precision(17);
    out << "iteration,converged";
    for (const auto& name : r.columns) {
        out << ',' << name;
    }
    out << '\n';
    for (std::size_t i = 0; i < r.trace.size(); ++i) {
        const auto& rec = r.trace[i];
        out << i << ',' << (rec.converged ? 1 : 0);
        for (std::size_t q = 0; q < r.columns.size(); ++q) {
            out << ',';
            if (q < rec.values.size()) {
                out << rec.values[q];
            }
        }
        out << '\n';
    }
    return out.str();
}

/// Bundle of virtual experiments that is itself a valid run configuration.
struct GeneratedBundle {
    std::vector<std::uint64_t> overlap_counts;
    std::vector<ExperimentCounts> onoff;
    std::vector<ExperimentCounts> pure;
    ExperimentCounts global;
};

inline GeneratedBundle run_virtual_experiments(const SyntheticCohort& cohort, unsigned workers) {
    const ModelStructure& s = cohort.spec().structure;
    GeneratedBundle b;
    b.overlap_counts = cohort.combination_counts();
    for (std::size_t j = 0; j < s.journey_count(); ++j) {
        b.onoff.push_back(virtual_experiment(cohort, Scenario::onoff(s, j), workers));
        b.pure.push_back(virtual_experiment(cohort, Scenario::pure(s, j), workers));
    }
    b.global = virtual_experiment(cohort, Scenario::global(s), workers);
    return b;
}

inline Json bundle_json(const WorldSpec& spec, const GeneratedBundle& b) {
    const ModelStructure& s = spec.structure;
    const JourneySet& journeys = s.journeys();
    Json counts = Json::object();
    for (std::uint32_t bits = 0; bits < journeys.combination_count(); ++bits) {
        counts[journeys.key({bits})] = b.overlap_counts[bits];
    }
    Json onoff = Json::object();
    Json pure = Json::object();
    for (std::size_t j = 0; j < s.journey_count(); ++j) {
        onoff[journeys.label(j)] = to_json(b.onoff[j]);
        // Pure experiments need control conversions to define a lift.
        if (b.pure[j].m_ctrl > 0 && b.pure[j].n_treat > 0 && b.pure[j].n_ctrl > 0) {
            pure[journeys.label(j)] = to_json(b.pure[j]);
        }
    }
    Json observed{{"onoff", onoff}, {"pure", pure}};
    if (b.global.m_ctrl > 0) {
        observed["global"] = to_json(b.global);
    }
    const FactorModel model(s);
    return Json{{"schema_version", kSchemaVersion},
                {"kind", "run_config"},
                {"journeys", journeys.labels()},
                {"interaction_order", s.interaction_order()},
                {"overlap", Json{{"counts", counts}}},
                {"observed", observed},
                {"hyperparams", Json{{"lambda_inter", 0.30}, {"w_pure", 0.20}}},
                {"monte_carlo", Json{{"iterations", 5000}, {"seed", spec.seed}}},
                {"truth", Json{{"theta", theta_json(s, spec.true_theta)},
                               {"base_rate", spec.base_rate},
                               {"cohort_size", spec.cohort_size},
                               {"unmodeled_additive", spec.unmodeled_additive},
                               {"derived", derived_json(s, model.derived_quantities(
                                                                spec.true_theta, spec.overlap))}}}};
}

}  // namespace liftlab::io
