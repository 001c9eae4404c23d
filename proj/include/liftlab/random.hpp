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

// Counter-based seeding and the distributions used by the Monte Carlo engine
// and the synthetic cohort generator.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <vector>

namespace liftlab::random {

/// SplitMix64 finalizer: a bijective 64-bit mixer.
constexpr std::uint64_t mix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Hash of (seed, counter, stream); distinct streams never share outputs in practice.
constexpr std::uint64_t hash3(std::uint64_t seed, std::uint64_t counter, std::uint64_t stream) {
    return mix64(mix64(mix64(seed) ^ counter) + stream * 0xD1B54A32D192ED03ULL);
}

/// Uniform double in [0, 1) from the top 53 bits.
constexpr double to_unit(std::uint64_t bits) {
    return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

/// Engine for the i-th independent substream of a seed.
inline std::mt19937_64 substream(std::uint64_t seed, std::uint64_t index) {
    std::seed_seq seq{static_cast<std::uint32_t>(hash3(seed, index, 1)),
                      static_cast<std::uint32_t>(hash3(seed, index, 1) >> 32),
                      static_cast<std::uint32_t>(hash3(seed, index, 2)),
                      static_cast<std::uint32_t>(hash3(seed, index, 2) >> 32)};
    return std::mt19937_64(seq);
}

/// log of a Gamma(shape, 1) draw; stays finite for very small shapes.
template <class Rng>
double log_gamma_draw(double shape, Rng& rng) {
    if (shape >= 1.0) {
        std::gamma_distribution<double> gamma(shape, 1.0);
        double g = 0.0;
        while (!(g > 0.0)) {
            g = gamma(rng);
        }
        return std::log(g);
    }
    // Gamma(a) = Gamma(a + 1) * U^(1/a)
    std::gamma_distribution<double> gamma(shape + 1.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double g = 0.0;
    while (!(g > 0.0)) {
        g = gamma(rng);
    }
    double u = 0.0;
    while (!(u > 0.0)) {
        u = unit(rng);
    }
    return std::log(g) + std::log(u) / shape;
}

/// Dirichlet draw; components with alpha == 0 are exactly zero.
template <class Rng>
std::vector<double> dirichlet(std::span<const double> alpha, Rng& rng) {
    std::vector<double> logs(alpha.size(), -std::numeric_limits<double>::infinity());
    double max_log = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < alpha.size(); ++i) {
        if (alpha[i] > 0.0) {
            logs[i] = log_gamma_draw(alpha[i], rng);
            max_log = std::max(max_log, logs[i]);
        }
    }
    std::vector<double> out(alpha.size(), 0.0);
    double total = 0.0;
    for (std::size_t i = 0; i < alpha.size(); ++i) {
        if (alpha[i] > 0.0) {
            out[i] = std::exp(logs[i] - max_log);
            total += out[i];
        }
    }
    for (double& v : out) {
        v /= total;
    }
    return out;
}

}  // namespace liftlab::random
