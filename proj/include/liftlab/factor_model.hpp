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

// Multiplicative lift model over overlapping journeys.
//
// Each journey j carries a factor f_j = 1 + pure lift, and each subset S of
// two or more journeys carries an interaction factor kappa_S. A user exposed
// to combination c converts at base * F(c), where F(c) is the product of f_j
// for j in c and of kappa_S for every S contained in c.

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "liftlab/errors.hpp"
#include "liftlab/journeys.hpp"

namespace liftlab {

inline constexpr double kSimplexTolerance = 1e-9;

/// Journeys plus the set of interaction subsets that carry a kappa.
class ModelStructure {
public:
    ModelStructure() = default;

    /// interaction_order = 0 means "all orders up to J".
    explicit ModelStructure(JourneySet journeys, std::size_t interaction_order = 0)
        : journeys_(std::move(journeys)),
          interaction_order_(interaction_order == 0 ? journeys_.size() : interaction_order),
          kappa_subsets_(interaction_subsets(journeys_.size(), interaction_order_)) {
        if (interaction_order_ > journeys_.size()) {
            interaction_order_ = journeys_.size();
        }
        active_kappas_.resize(journeys_.combination_count());
        for (std::uint32_t bits = 0; bits < journeys_.combination_count(); ++bits) {
            for (std::size_t s = 0; s < kappa_subsets_.size(); ++s) {
                if (Combination{bits}.includes(kappa_subsets_[s])) {
                    active_kappas_[bits].push_back(s);
                }
            }
        }
    }

    [[nodiscard]] const JourneySet& journeys() const { return journeys_; }
    [[nodiscard]] std::size_t journey_count() const { return journeys_.size(); }
    [[nodiscard]] std::size_t interaction_order() const { return interaction_order_; }
    [[nodiscard]] const std::vector<Combination>& kappa_subsets() const { return kappa_subsets_; }
    [[nodiscard]] std::size_t kappa_count() const { return kappa_subsets_.size(); }
    [[nodiscard]] std::size_t parameter_count() const { return journey_count() + kappa_count(); }
    [[nodiscard]] std::size_t combination_count() const { return journeys_.combination_count(); }

    /// Indices of kappa subsets contained in c.
    [[nodiscard]] const std::vector<std::size_t>& active_kappas(Combination c) const {
        return active_kappas_[c.bits];
    }

    /// Human-readable parameter name, e.g. "f:S" or "kappa:F+S".
    [[nodiscard]] std::string parameter_name(std::size_t k) const {
        if (k < journey_count()) {
            return "f:" + journeys_.label(k);
        }
        return "kappa:" + journeys_.key(kappa_subsets_.at(k - journey_count()));
    }

    friend bool operator==(const ModelStructure& a, const ModelStructure& b) {
        return a.journeys_ == b.journeys_ && a.interaction_order_ == b.interaction_order_;
    }

private:
    JourneySet journeys_;
    std::size_t interaction_order_ = 0;
    std::vector<Combination> kappa_subsets_;
    std::vector<std::vector<std::size_t>> active_kappas_;
};

/// Parameter vector: journey factors followed by interaction factors.
struct ModelParams {
    std::vector<double> f;
    std::vector<double> kappa;

    static ModelParams neutral(const ModelStructure& s) {
        return {std::vector<double>(s.journey_count(), 1.0),
                std::vector<double>(s.kappa_count(), 1.0)};
    }

    void validate(const ModelStructure& s) const {
        if (f.size() != s.journey_count() || kappa.size() != s.kappa_count()) {
            throw InvalidInput("parameter vector does not match model structure");
        }
        for (double v : f) {
            if (!(v > 0.0) || !std::isfinite(v)) {
                throw InvalidInput("journey factors must be finite and positive");
            }
        }
        for (double v : kappa) {
            if (!(v > 0.0) || !std::isfinite(v)) {
                throw InvalidInput("interaction factors must be finite and positive");
            }
        }
    }

    [[nodiscard]] std::size_t size() const { return f.size() + kappa.size(); }
    [[nodiscard]] double operator[](std::size_t k) const {
        return k < f.size() ? f[k] : kappa[k - f.size()];
    }
    double& operator[](std::size_t k) { return k < f.size() ? f[k] : kappa[k - f.size()]; }

    [[nodiscard]] std::vector<double> to_log() const {
        std::vector<double> out;
        out.reserve(size());
        for (std::size_t k = 0; k < size(); ++k) {
            out.push_back(std::log((*this)[k]));
        }
        return out;
    }

    static ModelParams from_log(const ModelStructure& s, const std::vector<double>& log_params) {
        ModelParams theta = neutral(s);
        for (std::size_t k = 0; k < theta.size(); ++k) {
            theta[k] = std::exp(log_params[k]);
        }
        return theta;
    }

    friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

/// Probability mass over all 2^J combinations, indexed by Combination::bits.
struct OverlapDistribution {
    std::vector<double> mass;

    [[nodiscard]] double operator[](Combination c) const { return mass[c.bits]; }

    void validate(std::size_t combination_count) const {
        if (mass.size() != combination_count) {
            throw InvalidInput("overlap distribution has " + std::to_string(mass.size()) +
                               " entries, expected " + std::to_string(combination_count));
        }
        double total = 0.0;
        for (double m : mass) {
            if (!(m >= 0.0) || !std::isfinite(m)) {
                throw InvalidInput("overlap masses must be finite and non-negative");
            }
            total += m;
        }
        if (std::abs(total - 1.0) > kSimplexTolerance) {
            throw InvalidInput("overlap masses sum to " + std::to_string(total) + ", expected 1");
        }
    }

    /// Normalizes raw per-combination user counts.
    static OverlapDistribution from_counts(const std::vector<double>& counts) {
        double total = 0.0;
        for (double c : counts) {
            if (!(c >= 0.0) || !std::isfinite(c)) {
                throw InvalidInput("overlap counts must be finite and non-negative");
            }
            total += c;
        }
        if (!(total > 0.0)) {
            throw InvalidInput("overlap counts sum to zero");
        }
        OverlapDistribution p{counts};
        for (double& m : p.mass) {
            m /= total;
        }
        return p;
    }
};

/// A lift value with its standard error.
struct Measurement {
    double value = 0.0;
    double se = 0.0;
};

struct ObservedLifts {
    std::vector<Measurement> onoff;               // one per journey
    std::vector<std::optional<Measurement>> pure;  // one slot per journey
    std::optional<Measurement> global;

    void validate(std::size_t journey_count) const {
        if (onoff.size() != journey_count) {
            throw InvalidInput("an ON/OFF lift is required for every journey");
        }
        if (!pure.empty() && pure.size() != journey_count) {
            throw InvalidInput("pure lift slots must match the journey count");
        }
        auto check = [](const Measurement& m, const char* what) {
            if (!std::isfinite(m.value) || !std::isfinite(m.se)) {
                throw InvalidInput(std::string(what) + " lift must be finite");
            }
            if (m.se < 0.0) {
                throw InvalidInput(std::string(what) + " standard error must be non-negative");
            }
            if (m.value <= -1.0) {
                throw InvalidInput(std::string(what) + " lift must exceed -1");
            }
        };
        for (const auto& m : onoff) {
            check(m, "ON/OFF");
        }
        for (const auto& m : pure) {
            if (m) {
                check(*m, "pure");
            }
        }
        if (global) {
            check(*global, "global");
        }
    }

    [[nodiscard]] std::size_t pure_count() const {
        std::size_t n = 0;
        for (const auto& m : pure) {
            n += m.has_value() ? 1 : 0;
        }
        return n;
    }
};

struct Hyperparams {
    double lambda_inter = 0.30;
    double w_pure = 0.20;

    void validate() const {
        if (!(lambda_inter >= 0.0) || !(w_pure >= 0.0) || !std::isfinite(lambda_inter) ||
            !std::isfinite(w_pure)) {
            throw InvalidInput("lambda_inter and w_pure must be finite and non-negative");
        }
    }
};

struct DerivedQuantities {
    std::vector<double> pure_lifts;   // f_j - 1
    std::vector<double> synergies;    // kappa_S - 1
    std::vector<double> onoff_lifts;  // predicted ON/OFF lift per journey
    double global_lift = 0.0;
};

/// Evaluates expectations and residuals of the multiplicative model.
class FactorModel {
public:
    explicit FactorModel(ModelStructure structure) : structure_(std::move(structure)) {}

    [[nodiscard]] const ModelStructure& structure() const { return structure_; }

    [[nodiscard]] double combination_factor(Combination c, const ModelParams& theta) const {
        double product = 1.0;
        for (std::size_t j = 0; j < structure_.journey_count(); ++j) {
            if (c.contains(j)) {
                product *= theta.f[j];
            }
        }
        for (std::size_t s : structure_.active_kappas(c)) {
            product *= theta.kappa[s];
        }
        return product;
    }

    /// F(c) for every combination, indexed by Combination::bits.
    [[nodiscard]] std::vector<double> factor_table(const ModelParams& theta) const {
        std::vector<double> table(structure_.combination_count());
        for (std::uint32_t bits = 0; bits < table.size(); ++bits) {
            table[bits] = combination_factor({bits}, theta);
        }
        return table;
    }

    [[nodiscard]] double expected_effect_on(const OverlapDistribution& p,
                                            const ModelParams& theta) const {
        return on_from_table(p, factor_table(theta));
    }

    /// Expectation with journey j switched off: removing j's factor and every
    /// interaction involving j leaves exactly F(c \ {j}).
    [[nodiscard]] double expected_effect_off(std::size_t j, const OverlapDistribution& p,
                                             const ModelParams& theta) const {
        const auto table = factor_table(theta);
        return off_from_table(j, p, table);
    }

    [[nodiscard]] double predicted_onoff_lift(std::size_t j, const OverlapDistribution& p,
                                              const ModelParams& theta) const {
        const auto table = factor_table(theta);
        return on_from_table(p, table) / off_from_table(j, p, table) - 1.0;
    }

    [[nodiscard]] double predicted_global_lift(const OverlapDistribution& p,
                                               const ModelParams& theta) const {
        return expected_effect_on(p, theta) - 1.0;
    }

    /// J + K + (#pure observations) residuals, in that order.
    [[nodiscard]] std::size_t residual_count(const ObservedLifts& obs) const {
        return structure_.journey_count() + structure_.kappa_count() + obs.pure_count();
    }

    /// Residuals: ON/OFF mismatch per journey, then sqrt(lambda) (kappa - 1) per
    /// interaction subset, then sqrt(w) ((f_j - 1) - pure_j) per supplied anchor.
    [[nodiscard]] std::vector<double> residual_vector(const ModelParams& theta,
                                                      const OverlapDistribution& p,
                                                      const ObservedLifts& obs,
                                                      const Hyperparams& hyper) const {
        const std::size_t n_j = structure_.journey_count();
        const auto table = factor_table(theta);
        const double e_on = on_from_table(p, table);

        std::vector<double> r;
        r.reserve(residual_count(obs));
        for (std::size_t j = 0; j < n_j; ++j) {
            r.push_back(e_on / off_from_table(j, p, table) - 1.0 - obs.onoff[j].value);
        }
        const double ridge = std::sqrt(hyper.lambda_inter);
        for (double k : theta.kappa) {
            r.push_back(ridge * (k - 1.0));
        }
        const double anchor = std::sqrt(hyper.w_pure);
        for (std::size_t j = 0; j < obs.pure.size(); ++j) {
            if (obs.pure[j]) {
                r.push_back(anchor * ((theta.f[j] - 1.0) - obs.pure[j]->value));
            }
        }
        return r;
    }

    /// Jacobian of residual_vector with respect to (log f, log kappa), row-major
    /// residual_count x parameter_count.
    [[nodiscard]] std::vector<double> residual_jacobian(const ModelParams& theta,
                                                        const OverlapDistribution& p,
                                                        const ObservedLifts& obs,
                                                        const Hyperparams& hyper) const {
        const std::size_t n_j = structure_.journey_count();
        const std::size_t n_p = structure_.parameter_count();
        const std::size_t n_r = residual_count(obs);
        const auto table = factor_table(theta);
        std::vector<double> jac(n_r * n_p, 0.0);

        // d F(c) / d log(theta_k) = F(c) when parameter k is active in c.
        auto accumulate = [&](std::vector<double>& grad, Combination c, double weight) {
            for (std::size_t j = 0; j < n_j; ++j) {
                if (c.contains(j)) {
                    grad[j] += weight;
                }
            }
            for (std::size_t s : structure_.active_kappas(c)) {
                grad[n_j + s] += weight;
            }
        };

        double e_on = 0.0;
        std::vector<double> d_on(n_p, 0.0);
        for (std::uint32_t bits = 0; bits < table.size(); ++bits) {
            const double w = p.mass[bits] * table[bits];
            e_on += w;
            accumulate(d_on, {bits}, w);
        }
        for (std::size_t j = 0; j < n_j; ++j) {
            double e_off = 0.0;
            std::vector<double> d_off(n_p, 0.0);
            for (std::uint32_t bits = 0; bits < table.size(); ++bits) {
                const Combination reduced = Combination{bits}.without(j);
                const double w = p.mass[bits] * table[reduced.bits];
                e_off += w;
                accumulate(d_off, reduced, w);
            }
            for (std::size_t k = 0; k < n_p; ++k) {
                jac[j * n_p + k] = (d_on[k] * e_off - e_on * d_off[k]) / (e_off * e_off);
            }
        }
        std::size_t row = n_j;
        const double ridge = std::sqrt(hyper.lambda_inter);
        for (std::size_t s = 0; s < structure_.kappa_count(); ++s, ++row) {
            jac[row * n_p + n_j + s] = ridge * theta.kappa[s];
        }
        const double anchor = std::sqrt(hyper.w_pure);
        for (std::size_t j = 0; j < obs.pure.size(); ++j) {
            if (obs.pure[j]) {
                jac[row * n_p + j] = anchor * theta.f[j];
                ++row;
            }
        }
        return jac;
    }

    [[nodiscard]] DerivedQuantities derived_quantities(const ModelParams& theta,
                                                       const OverlapDistribution& p) const {
        DerivedQuantities d;
        for (double f : theta.f) {
            d.pure_lifts.push_back(f - 1.0);
        }
        for (double k : theta.kappa) {
            d.synergies.push_back(k - 1.0);
        }
        const auto table = factor_table(theta);
        const double e_on = on_from_table(p, table);
        for (std::size_t j = 0; j < structure_.journey_count(); ++j) {
            d.onoff_lifts.push_back(e_on / off_from_table(j, p, table) - 1.0);
        }
        d.global_lift = e_on - 1.0;
        return d;
    }

private:
    static double on_from_table(const OverlapDistribution& p, const std::vector<double>& table) {
        double sum = 0.0;
        for (std::uint32_t bits = 0; bits < table.size(); ++bits) {
            sum += p.mass[bits] * table[bits];
        }
        return sum;
    }

    static double off_from_table(std::size_t j, const OverlapDistribution& p,
                                 const std::vector<double>& table) {
        double sum = 0.0;
        for (std::uint32_t bits = 0; bits < table.size(); ++bits) {
            sum += p.mass[bits] * table[Combination{bits}.without(j).bits];
        }
        return sum;
    }

    ModelStructure structure_;
};

}  // namespace liftlab
