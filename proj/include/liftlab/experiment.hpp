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

// Observed A/B lift from raw branch tallies.
//
// The two-branch regression Y = beta0 + beta1 * T (T = 1 for treatment) has
// only an intercept and one binary regressor, so its OLS solution is the pair
// of group means. Coefficient covariance uses per-group binomial variances.
// The lift beta1 / beta0 is treatment relative to control and its variance is
// propagated with the delta method.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>

#include "liftlab/errors.hpp"

namespace liftlab {

inline constexpr double kZ95 = 1.96;
inline constexpr double kPsdTolerance = 1e-12;

struct ExperimentCounts {
    std::uint64_t n_treat = 0;
    std::uint64_t m_treat = 0;
    std::uint64_t n_ctrl = 0;
    std::uint64_t m_ctrl = 0;

    void validate() const {
        if (n_treat < 1 || n_ctrl < 1) {
            throw InvalidInput("each branch needs at least one user");
        }
        if (m_treat > n_treat) {
            throw InvalidInput("m_treat (" + std::to_string(m_treat) + ") exceeds n_treat (" +
                               std::to_string(n_treat) + ")");
        }
        if (m_ctrl > n_ctrl) {
            throw InvalidInput("m_ctrl (" + std::to_string(m_ctrl) + ") exceeds n_ctrl (" +
                               std::to_string(n_ctrl) + ")");
        }
    }

    /// Counts with the branches exchanged.
    [[nodiscard]] ExperimentCounts swapped() const { return {n_ctrl, m_ctrl, n_treat, m_treat}; }

    friend bool operator==(const ExperimentCounts&, const ExperimentCounts&) = default;
};

struct ConversionRates {
    double p_treat = 0.0;
    double p_ctrl = 0.0;
};

/// Symmetric 2x2 matrix over (beta0, beta1).
struct Covariance2 {
    double var0 = 0.0;
    double cov01 = 0.0;
    double var1 = 0.0;

    [[nodiscard]] double quadratic_form(double g0, double g1) const {
        return g0 * g0 * var0 + 2.0 * g0 * g1 * cov01 + g1 * g1 * var1;
    }
    [[nodiscard]] double determinant() const { return var0 * var1 - cov01 * cov01; }
};

struct RegressionCoefficients {
    double beta0 = 0.0;  // control conversion rate
    double beta1 = 0.0;  // treatment minus control
    Covariance2 cov;
};

struct LiftEstimate {
    double lift = 0.0;
    double se = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
};

inline ConversionRates conversion_rates(const ExperimentCounts& counts) {
    counts.validate();
    return {static_cast<double>(counts.m_treat) / static_cast<double>(counts.n_treat),
            static_cast<double>(counts.m_ctrl) / static_cast<double>(counts.n_ctrl)};
}

inline RegressionCoefficients regression_coefficients(const ExperimentCounts& counts) {
    const ConversionRates rates = conversion_rates(counts);
    const double var_ctrl = rates.p_ctrl * (1.0 - rates.p_ctrl) / static_cast<double>(counts.n_ctrl);
    const double var_treat =
        rates.p_treat * (1.0 - rates.p_treat) / static_cast<double>(counts.n_treat);

    RegressionCoefficients coefs;
    coefs.beta0 = rates.p_ctrl;
    coefs.beta1 = rates.p_treat - rates.p_ctrl;
    coefs.cov.var0 = var_ctrl;
    coefs.cov.cov01 = -var_ctrl;
    coefs.cov.var1 = var_treat + var_ctrl;
    return coefs;
}

inline LiftEstimate delta_method_lift(const RegressionCoefficients& coefs) {
    if (coefs.beta0 == 0.0) {
        throw ZeroBaseline();
    }
    const double lift = coefs.beta1 / coefs.beta0;
    const double g0 = -coefs.beta1 / (coefs.beta0 * coefs.beta0);
    const double g1 = 1.0 / coefs.beta0;
    double variance = coefs.cov.quadratic_form(g0, g1);
    if (variance < -kPsdTolerance || !std::isfinite(variance)) {
        throw NegativeVariance(variance);
    }
    variance = std::max(variance, 0.0);
    const double se = std::sqrt(variance);
    return {lift, se, lift - kZ95 * se, lift + kZ95 * se};
}

inline LiftEstimate estimate_lift(const ExperimentCounts& counts) {
    counts.validate();
    if (counts.m_ctrl == 0) {
        throw ZeroBaseline();
    }
    return delta_method_lift(regression_coefficients(counts));
}

}  // namespace liftlab
