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

// Synthetic cohorts with known ground truth, virtual A/B experiments on them,
// and a brute-force enumeration oracle for the factor model expectations.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "liftlab/errors.hpp"
#include "liftlab/experiment.hpp"
#include "liftlab/factor_model.hpp"
#include "liftlab/random.hpp"

namespace liftlab {

inline constexpr std::uint64_t kDefaultCohortSize = 3'000'000;

struct WorldSpec {
    ModelStructure structure;
    ModelParams true_theta;
    OverlapDistribution overlap;
    double base_rate = 0.01;
    std::uint64_t cohort_size = kDefaultCohortSize;
    std::uint64_t seed = 0;
    /// Extra conversion probability for users whose branch has the non-journey
    /// service channel switched on. The factor model has no term for it.
    double unmodeled_additive = 0.0;

    [[nodiscard]] double max_conversion_probability() const {
        const FactorModel model(structure);
        double max_factor = 0.0;
        for (std::uint32_t bits = 0; bits < structure.combination_count(); ++bits) {
            max_factor = std::max(max_factor, model.combination_factor({bits}, true_theta));
        }
        return base_rate * max_factor + unmodeled_additive;
    }

    void validate() const {
        if (cohort_size < 1) {
            throw InvalidWorld("cohort_size must be at least 1");
        }
        if (!(base_rate > 0.0 && base_rate < 1.0)) {
            throw InvalidWorld("base_rate must lie in (0, 1)");
        }
        if (!(unmodeled_additive >= 0.0)) {
            throw InvalidWorld("unmodeled_additive must be non-negative");
        }
        try {
            true_theta.validate(structure);
            overlap.validate(structure.combination_count());
        } catch (const InvalidInput& e) {
            throw InvalidWorld(e.what());
        }
        const double max_p = max_conversion_probability();
        if (max_p > 1.0) {
            throw InvalidWorld("largest conversion probability " + std::to_string(max_p) +
                               " exceeds 1");
        }
    }
};

/// Which journeys (and whether the service channel) each branch receives, and
/// optionally a single combination the experiment is restricted to.
struct Scenario {
    Combination treatment_active;
    Combination control_active;
    std::optional<Combination> population;
    bool treatment_services = false;
    bool control_services = false;

    /// Journey j toggled while every other journey stays on in both branches.
    static Scenario onoff(const ModelStructure& s, std::size_t j) {
        const Combination all = s.journeys().all();
        return {all, all.without(j), std::nullopt, true, true};
    }

    /// Journey j toggled, measured only on users exposed to j alone.
    static Scenario pure(const ModelStructure& s, std::size_t j) {
        Scenario sc = onoff(s, j);
        sc.population = Combination::single(j);
        return sc;
    }

    /// Every communication on in treatment and off in control.
    static Scenario global(const ModelStructure& s) {
        return {s.journeys().all(), {}, std::nullopt, true, false};
    }

    [[nodiscard]] std::uint64_t stream_tag() const {
        std::uint64_t tag = treatment_active.bits;
        tag = tag * 8191 + control_active.bits;
        tag = tag * 8191 + (population ? population->bits + 1 : 0);
        tag = tag * 4 + (treatment_services ? 2 : 0) + (control_services ? 1 : 0);
        return random::mix64(tag) | 1;  // never collides with the membership streams
    }
};

namespace detail {
inline constexpr std::uint64_t kMembershipStream = 2;
inline constexpr std::uint64_t kBranchStream = 4;

template <class Fn>
void parallel_ranges(std::uint64_t n, unsigned workers, Fn&& fn) {
    workers = std::max(1U, workers);
    if (workers == 1 || n < 2 * workers) {
        fn(0, n, 0U);
        return;
    }
    std::vector<std::jthread> pool;
    const std::uint64_t chunk = (n + workers - 1) / workers;
    for (unsigned w = 0; w < workers; ++w) {
        const std::uint64_t begin = std::min(n, chunk * w);
        const std::uint64_t end = std::min(n, begin + chunk);
        pool.emplace_back([&fn, begin, end, w] { fn(begin, end, w); });
    }
}
}  // namespace detail

class SyntheticCohort {
public:
    SyntheticCohort(WorldSpec spec, std::vector<std::uint16_t> membership)
        : spec_(std::move(spec)), model_(spec_.structure), membership_(std::move(membership)) {}

    [[nodiscard]] const WorldSpec& spec() const { return spec_; }
    [[nodiscard]] std::uint64_t size() const { return membership_.size(); }
    [[nodiscard]] Combination combination(std::uint64_t user) const {
        return {membership_[user]};
    }

    /// One branch bit per user shared by every experiment (1 = treatment).
    [[nodiscard]] bool in_treatment(std::uint64_t user) const {
        return (random::hash3(spec_.seed, user, detail::kBranchStream) >> 63) != 0;
    }

    [[nodiscard]] double conversion_probability(std::uint64_t user, const Scenario& sc) const {
        const bool treat = in_treatment(user);
        const Combination active = treat ? sc.treatment_active : sc.control_active;
        const Combination effective{combination(user).bits & active.bits};
        const bool services = treat ? sc.treatment_services : sc.control_services;
        return spec_.base_rate * model_.combination_factor(effective, spec_.true_theta) +
               (services ? spec_.unmodeled_additive : 0.0);
    }

    [[nodiscard]] bool converts(std::uint64_t user, const Scenario& sc) const {
        const double u = random::to_unit(random::hash3(spec_.seed, user, sc.stream_tag()));
        return u < conversion_probability(user, sc);
    }

    /// User counts per combination, indexed by Combination::bits.
    [[nodiscard]] std::vector<std::uint64_t> combination_counts() const {
        std::vector<std::uint64_t> counts(spec_.structure.combination_count(), 0);
        for (std::uint16_t bits : membership_) {
            ++counts[bits];
        }
        return counts;
    }

private:
    WorldSpec spec_;
    FactorModel model_;
    std::vector<std::uint16_t> membership_;
};

inline SyntheticCohort generate_cohort(const WorldSpec& spec, unsigned workers = 1) {
    spec.validate();
    std::vector<double> cdf(spec.overlap.mass.size());
    double running = 0.0;
    for (std::size_t i = 0; i < cdf.size(); ++i) {
        running += spec.overlap.mass[i];
        cdf[i] = running;
    }
    std::size_t last_positive = 0;
    for (std::size_t i = 0; i < cdf.size(); ++i) {
        if (spec.overlap.mass[i] > 0.0) {
            last_positive = i;
        }
    }

    std::vector<std::uint16_t> membership(spec.cohort_size);
    detail::parallel_ranges(spec.cohort_size, workers,
                            [&](std::uint64_t begin, std::uint64_t end, unsigned) {
        for (std::uint64_t user = begin; user < end; ++user) {
            const double u = random::to_unit(
                random::hash3(spec.seed, user, detail::kMembershipStream)) * running;
            std::size_t c = 0;
            while (c < last_positive && !(u < cdf[c])) {
                ++c;
            }
            membership[user] = static_cast<std::uint16_t>(c);
        }
    });
    return SyntheticCohort(spec, std::move(membership));
}

inline ExperimentCounts virtual_experiment(const SyntheticCohort& cohort, const Scenario& scenario,
                                           unsigned workers = 1) {
    workers = std::max(1U, workers);
    std::vector<ExperimentCounts> partial(workers);
    detail::parallel_ranges(cohort.size(), workers,
                            [&](std::uint64_t begin, std::uint64_t end, unsigned w) {
        ExperimentCounts local;
        for (std::uint64_t user = begin; user < end; ++user) {
            if (scenario.population && cohort.combination(user) != *scenario.population) {
                continue;
            }
            const bool treat = cohort.in_treatment(user);
            const bool converted = cohort.converts(user, scenario);
            if (treat) {
                ++local.n_treat;
                local.m_treat += converted ? 1 : 0;
            } else {
                ++local.n_ctrl;
                local.m_ctrl += converted ? 1 : 0;
            }
        }
        partial[w] = local;
    });
    ExperimentCounts total;
    for (const auto& c : partial) {
        total.n_treat += c.n_treat;
        total.m_treat += c.m_treat;
        total.n_ctrl += c.n_ctrl;
        total.m_ctrl += c.m_ctrl;
    }
    return total;
}

/// CSV with header: user_id,combination,branch,converted (under the scenario).
inline void write_cohort_csv(const SyntheticCohort& cohort, const Scenario& scenario,
                             std::ostream& out) {
    out << "user_id,combination,branch,converted\n";
    for (std::uint64_t user = 0; user < cohort.size(); ++user) {
        out << user << ',' << cohort.combination(user).bits << ','
            << (cohort.in_treatment(user) ? 1 : 0) << ','
            << (cohort.converts(user, scenario) ? 1 : 0) << '\n';
    }
}

/// Sum over every combination c of p_c * F(c) / (removed factors), where the
/// removed factors are f_j for j in c and off_set, and every kappa_S with S
/// inside c that touches off_set. Evaluated by explicit set manipulation over
/// labels, independent of FactorModel.
inline double enumeration_oracle(const ModelStructure& structure, const OverlapDistribution& p,
                                 const ModelParams& theta, const std::set<std::string>& off_set) {
    const auto& labels = structure.journeys().labels();
    if (labels.size() > kJourneyLimit) {
        throw InvalidInput("enumeration oracle supports at most 12 journeys");
    }
    std::vector<std::set<std::string>> kappa_sets;
    for (const Combination subset : structure.kappa_subsets()) {
        std::set<std::string> members;
        for (std::size_t j = 0; j < labels.size(); ++j) {
            if ((subset.bits >> j) & 1U) {
                members.insert(labels[j]);
            }
        }
        kappa_sets.push_back(std::move(members));
    }

    double total = 0.0;
    const std::size_t n_comb = std::size_t{1} << labels.size();
    for (std::size_t bits = 0; bits < n_comb; ++bits) {
        std::set<std::string> c;
        for (std::size_t j = 0; j < labels.size(); ++j) {
            if ((bits >> j) & 1U) {
                c.insert(labels[j]);
            }
        }
        double numerator = 1.0;
        double denominator = 1.0;
        for (std::size_t j = 0; j < labels.size(); ++j) {
            if (c.count(labels[j]) != 0) {
                numerator *= theta.f[j];
                if (off_set.count(labels[j]) != 0) {
                    denominator *= theta.f[j];
                }
            }
        }
        for (std::size_t s = 0; s < kappa_sets.size(); ++s) {
            const auto& subset = kappa_sets[s];
            if (std::includes(c.begin(), c.end(), subset.begin(), subset.end())) {
                numerator *= theta.kappa[s];
                const bool touches_off = std::any_of(subset.begin(), subset.end(),
                    [&](const std::string& label) { return off_set.count(label) != 0; });
                if (touches_off) {
                    denominator *= theta.kappa[s];
                }
            }
        }
        total += p.mass[bits] * (numerator / denominator);
    }
    return total;
}

}  // namespace liftlab
