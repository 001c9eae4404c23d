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

// Regularized nonlinear least squares for the factor model.
//
// Minimizes the squared norm of FactorModel::residual_vector with a damped
// Gauss-Newton (Levenberg-Marquardt) iteration over log-parameters, so every
// iterate has strictly positive factors.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "liftlab/errors.hpp"
#include "liftlab/factor_model.hpp"

namespace liftlab {

struct FitConfig {
    int max_iterations = 200;
    double gradient_tolerance = 1e-10;  // max-norm of the objective gradient
    double step_tolerance = 1e-12;      // max relative parameter change
    std::optional<ModelParams> initial_theta;

    void validate() const {
        if (max_iterations < 1) {
            throw InvalidInput("max_iterations must be at least 1");
        }
        if (!(gradient_tolerance > 0.0) || !(step_tolerance > 0.0)) {
            throw InvalidInput("fit tolerances must be positive");
        }
    }
};

enum class Termination { GradientTolerance, StepTolerance, MaxIterations };

inline const char* to_string(Termination t) {
    switch (t) {
        case Termination::GradientTolerance:
            return "gradient_tolerance";
        case Termination::StepTolerance:
            return "step_tolerance";
        case Termination::MaxIterations:
            return "max_iterations";
    }
    return "unknown";
}

struct FitResult {
    ModelParams theta;
    double objective_value = 0.0;
    std::vector<double> residuals;
    bool converged = false;
    Termination termination = Termination::MaxIterations;
    int iterations = 0;
    DerivedQuantities derived;
    std::vector<std::string> warnings;
    std::vector<double> objective_trace;  // objective after each accepted step, starting point first
};

namespace detail {

inline double squared_norm(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) {
        s += x * x;
    }
    return s;
}

inline bool all_finite(const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline void validate_problem(const FactorModel& model, const OverlapDistribution& p,
                             const ObservedLifts& obs, const Hyperparams& hyper) {
    const ModelStructure& s = model.structure();
    p.validate(s.combination_count());
    obs.validate(s.journey_count());
    hyper.validate();
}

}  // namespace detail

/// Gradient of the summed squared residuals with respect to log-parameters.
inline std::vector<double> objective_gradient(const FactorModel& model, const ModelParams& theta,
                                              const OverlapDistribution& p,
                                              const ObservedLifts& obs,
                                              const Hyperparams& hyper) {
    const auto r = model.residual_vector(theta, p, obs, hyper);
    if (!detail::all_finite(r)) {
        throw NonFiniteObjective("residuals are not finite at the supplied parameters");
    }
    const auto jac = model.residual_jacobian(theta, p, obs, hyper);
    const std::size_t n_p = model.structure().parameter_count();
    std::vector<double> grad(n_p, 0.0);
    for (std::size_t i = 0; i < r.size(); ++i) {
        for (std::size_t k = 0; k < n_p; ++k) {
            grad[k] += 2.0 * jac[i * n_p + k] * r[i];
        }
    }
    return grad;
}

/// Default starting point: f_j = 1 + observed ON/OFF lift, all kappa = 1.
inline ModelParams default_initial_theta(const ModelStructure& s, const ObservedLifts& obs) {
    ModelParams theta = ModelParams::neutral(s);
    for (std::size_t j = 0; j < s.journey_count(); ++j) {
        theta.f[j] = 1.0 + obs.onoff[j].value;
    }
    return theta;
}

inline FitResult fit(const FactorModel& model, const OverlapDistribution& p,
                     const ObservedLifts& obs, const Hyperparams& hyper,
                     const FitConfig& config = {}) {
    detail::validate_problem(model, p, obs, hyper);
    config.validate();
    const ModelStructure& s = model.structure();
    const std::size_t n_p = s.parameter_count();
    const std::size_t n_r = model.residual_count(obs);
    if (n_r == 0 || n_p == 0) {
        throw DegenerateProblem("the residual vector is empty");
    }

    FitResult result;
    if (hyper.lambda_inter == 0.0 && hyper.w_pure == 0.0 && s.kappa_count() > 0) {
        result.warnings.emplace_back(
            "lambda_inter and w_pure are both zero; interaction factors are not identified");
    }

    ModelParams theta = config.initial_theta.value_or(default_initial_theta(s, obs));
    theta.validate(s);
    std::vector<double> log_theta = theta.to_log();

    std::vector<double> r = model.residual_vector(theta, p, obs, hyper);
    if (!detail::all_finite(r)) {
        throw NonFiniteObjective("residuals are not finite at the initial parameters");
    }
    double cost = detail::squared_norm(r);
    result.objective_trace.push_back(cost);

    double mu = 1e-3;  // relative to Marquardt diagonal scaling
    double nu = 2.0;
    Termination termination = Termination::MaxIterations;
    int iteration = 0;
    bool need_jacobian = true;
    Eigen::MatrixXd normal;
    Eigen::VectorXd half_grad;

    for (; iteration < config.max_iterations; ++iteration) {
        if (need_jacobian) {
            const auto jac_data = model.residual_jacobian(theta, p, obs, hyper);
            const Eigen::Map<const detail::RowMajorMatrix> jac(jac_data.data(),
                                                               static_cast<Eigen::Index>(n_r),
                                                               static_cast<Eigen::Index>(n_p));
            const Eigen::Map<const Eigen::VectorXd> res(r.data(), static_cast<Eigen::Index>(n_r));
            normal = jac.transpose() * jac;
            half_grad = jac.transpose() * res;
            need_jacobian = false;
        }
        if (2.0 * half_grad.cwiseAbs().maxCoeff() <= config.gradient_tolerance) {
            termination = Termination::GradientTolerance;
            break;
        }

        const Eigen::VectorXd diag = normal.diagonal();
        const double max_diag = diag.maxCoeff();
        const Eigen::VectorXd scaling = diag.cwiseMax(1e-12 * max_diag);
        Eigen::MatrixXd damped = normal;
        damped.diagonal() += mu * scaling;
        const Eigen::VectorXd step = damped.ldlt().solve(-half_grad);

        if (!step.allFinite()) {
            mu *= nu;
            nu *= 2.0;
            continue;
        }
        if (step.cwiseAbs().maxCoeff() <= config.step_tolerance) {
            termination = Termination::StepTolerance;
            break;
        }

        std::vector<double> trial_log = log_theta;
        for (std::size_t k = 0; k < n_p; ++k) {
            trial_log[k] += step[static_cast<Eigen::Index>(k)];
        }
        const ModelParams trial = ModelParams::from_log(s, trial_log);
        const auto trial_r = model.residual_vector(trial, p, obs, hyper);
        const double trial_cost =
            detail::all_finite(trial_r) ? detail::squared_norm(trial_r) : HUGE_VAL;

        const double predicted =
            -step.dot(half_grad) + mu * step.dot(scaling.cwiseProduct(step));
        if (std::isfinite(trial_cost) && trial_cost < cost && predicted > 0.0) {
            const double rho = (cost - trial_cost) / predicted;
            mu *= std::max(1.0 / 3.0, 1.0 - std::pow(2.0 * rho - 1.0, 3));
            nu = 2.0;
            log_theta = trial_log;
            theta = trial;
            r = trial_r;
            cost = trial_cost;
            result.objective_trace.push_back(cost);
            need_jacobian = true;
        } else {
            mu *= nu;
            nu *= 2.0;
            if (!std::isfinite(mu)) {
                termination = Termination::StepTolerance;
                break;
            }
        }
    }

    result.theta = theta;
    result.residuals = r;
    result.objective_value = cost;
    result.termination = termination;
    result.converged = termination != Termination::MaxIterations;
    result.iterations = iteration;
    result.derived = model.derived_quantities(theta, p);
    return result;
}

}  // namespace liftlab
