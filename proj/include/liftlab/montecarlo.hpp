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

// Monte Carlo uncertainty for the factor model: each iteration resamples the
// overlap proportions from a Dirichlet, perturbs every lift observation with
// Gaussian noise at its standard error, and refits.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "liftlab/errors.hpp"
#include "liftlab/estimator.hpp"
#include "liftlab/factor_model.hpp"
#include "liftlab/random.hpp"

namespace liftlab {

inline constexpr double kLiftFloor = -0.999;

struct McConfig {
    int iterations = 5000;
    std::uint64_t seed = 0;
    /// alpha_c = concentration * p_c; normally the cohort size behind p.
    double dirichlet_concentration = 0.0;
    bool cold_start = false;
    unsigned workers = 1;
    bool keep_trace = false;

    void validate() const {
        if (iterations < 1) {
            throw InvalidInput("Monte Carlo iterations must be at least 1");
        }
        if (!(dirichlet_concentration > 0.0)) {
            throw InvalidInput("dirichlet_concentration must be positive");
        }
    }
};

struct QuantitySummary {
    std::string name;
    double mean = 0.0;
    double median = 0.0;
    double p2_5 = 0.0;
    double p25 = 0.0;
    double p75 = 0.0;
    double p97_5 = 0.0;
};

struct McSummary {
    int iterations = 0;
    int converged = 0;
    int failures = 0;
    std::vector<QuantitySummary> parameters;
    std::vector<QuantitySummary> derived;
};

struct IterationRecord {
    bool converged = false;
    std::vector<double> values;  // parameters then derived quantities
};

struct McResult {
    McSummary summary;
    FitResult point_fit;
    std::vector<std::string> columns;    // names of IterationRecord::values
    std::vector<IterationRecord> trace;  // filled when McConfig::keep_trace
};

template <class Rng>
OverlapDistribution sample_proportions(const OverlapDistribution& base, double concentration,
                                       Rng& rng) {
    if (!(concentration > 0.0)) {
        throw InvalidInput("concentration must be positive");
    }
    std::vector<double> alpha(base.mass.size());
    for (std::size_t i = 0; i < alpha.size(); ++i) {
        alpha[i] = concentration * base.mass[i];
    }
    return {random::dirichlet(std::span<const double>(alpha), rng)};
}

template <class Rng>
ObservedLifts perturb_lifts(const ObservedLifts& obs, Rng& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    auto perturb = [&](Measurement& m) {
        const double z = normal(rng);
        if (m.se > 0.0) {
            m.value = std::max(m.value + m.se * z, kLiftFloor);
        }
    };
    ObservedLifts out = obs;
    for (auto& m : out.onoff) {
        perturb(m);
    }
    for (auto& m : out.pure) {
        if (m) {
            perturb(*m);
        }
    }
    if (out.global) {
        perturb(*out.global);
    }
    return out;
}

/// Column names for the per-iteration values.
inline std::vector<std::string> quantity_names(const ModelStructure& s) {
    std::vector<std::string> names;
    for (std::size_t k = 0; k < s.parameter_count(); ++k) {
        names.push_back(s.parameter_name(k));
    }
    for (const auto& label : s.journeys().labels()) {
        names.push_back("pure_lift:" + label);
    }
    for (const auto& subset : s.kappa_subsets()) {
        names.push_back("synergy:" + s.journeys().key(subset));
    }
    for (const auto& label : s.journeys().labels()) {
        names.push_back("onoff_lift:" + label);
    }
    names.emplace_back("global_lift");
    return names;
}

inline std::vector<double> quantity_values(const FitResult& fit_result) {
    std::vector<double> values;
    const ModelParams& theta = fit_result.theta;
    for (std::size_t k = 0; k < theta.size(); ++k) {
        values.push_back(theta[k]);
    }
    const DerivedQuantities& d = fit_result.derived;
    values.insert(values.end(), d.pure_lifts.begin(), d.pure_lifts.end());
    values.insert(values.end(), d.synergies.begin(), d.synergies.end());
    values.insert(values.end(), d.onoff_lifts.begin(), d.onoff_lifts.end());
    values.push_back(d.global_lift);
    return values;
}

/// Linear-interpolation quantile of sorted data, q in [0, 1].
inline double sorted_quantile(const std::vector<double>& sorted, double q) {
    if (sorted.size() == 1) {
        return sorted.front();
    }
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

inline QuantitySummary summarize(std::string name, std::vector<double> values) {
    QuantitySummary out;
    out.name = std::move(name);
    double sum = 0.0;
    for (double v : values) {
        sum += v;
    }
    out.mean = sum / static_cast<double>(values.size());
    std::sort(values.begin(), values.end());
    out.p2_5 = sorted_quantile(values, 0.025);
    out.p25 = sorted_quantile(values, 0.25);
    out.median = sorted_quantile(values, 0.5);
    out.p75 = sorted_quantile(values, 0.75);
    out.p97_5 = sorted_quantile(values, 0.975);
    return out;
}

/// One Monte Carlo draw and refit; deterministic in (seed, index).
inline IterationRecord monte_carlo_iteration(const FactorModel& model,
                                             const OverlapDistribution& p,
                                             const ObservedLifts& obs, const Hyperparams& hyper,
                                             const FitConfig& fit_config, const McConfig& mc,
                                             std::uint64_t index) {
    auto rng = random::substream(mc.seed, index);
    const OverlapDistribution sampled = sample_proportions(p, mc.dirichlet_concentration, rng);
    const ObservedLifts perturbed = perturb_lifts(obs, rng);
    IterationRecord record;
    try {
        const FitResult r = fit(model, sampled, perturbed, hyper, fit_config);
        record.converged = r.converged;
        record.values = quantity_values(r);
    } catch (const Error&) {
        record.converged = false;
    }
    return record;
}

inline McResult run_monte_carlo(const FactorModel& model, const OverlapDistribution& p,
                                const ObservedLifts& obs, const Hyperparams& hyper,
                                const FitConfig& fit_config, const McConfig& mc) {
    mc.validate();
    const ModelStructure& s = model.structure();

    McResult result;
    result.point_fit = fit(model, p, obs, hyper, fit_config);
    result.columns = quantity_names(s);

    FitConfig iteration_config = fit_config;
    if (!mc.cold_start) {
        iteration_config.initial_theta = result.point_fit.theta;
    }

    const auto n = static_cast<std::size_t>(mc.iterations);
    std::vector<IterationRecord> records(n);
    const unsigned workers = std::max(1U, std::min<unsigned>(mc.workers, mc.iterations));
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
            records[i] = monte_carlo_iteration(model, p, obs, hyper, iteration_config, mc, i);
        }
    };
    if (workers == 1) {
        work();
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (unsigned w = 0; w < workers; ++w) {
            pool.emplace_back(work);
        }
    }

    McSummary& summary = result.summary;
    summary.iterations = mc.iterations;
    const std::size_t n_quantities = result.columns.size();
    std::vector<std::vector<double>> columns(n_quantities);
    for (const auto& rec : records) {
        if (!rec.converged) {
            ++summary.failures;
            continue;
        }
        ++summary.converged;
        for (std::size_t q = 0; q < n_quantities; ++q) {
            columns[q].push_back(rec.values[q]);
        }
    }
    if (summary.converged == 0) {
        throw AllFitsFailed("none of the " + std::to_string(mc.iterations) +
                            " Monte Carlo fits converged");
    }
    for (std::size_t q = 0; q < n_quantities; ++q) {
        auto item = summarize(result.columns[q], std::move(columns[q]));
        if (q < s.parameter_count()) {
            summary.parameters.push_back(std::move(item));
        } else {
            summary.derived.push_back(std::move(item));
        }
    }
    if (mc.keep_trace) {
        result.trace = std::move(records);
    }
    return result;
}

}  // namespace liftlab
