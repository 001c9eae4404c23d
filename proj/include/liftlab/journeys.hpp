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

#include <algorithm>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "liftlab/errors.hpp"

namespace liftlab {

/// Hard ceiling imposed by 2^J enumeration.
inline constexpr std::size_t kJourneyLimit = 12;
inline constexpr std::size_t kDefaultMaxJourneys = 4;

/// Key of the empty combination in serialized documents.
inline constexpr std::string_view kEmptyCombinationKey = "none";

/// A subset of journeys, stored as a bitmask over JourneySet positions.
struct Combination {
    std::uint32_t bits = 0;

    static constexpr Combination single(std::size_t journey) {
        return {std::uint32_t{1} << journey};
    }

    [[nodiscard]] constexpr bool empty() const { return bits == 0; }
    [[nodiscard]] constexpr bool contains(std::size_t journey) const {
        return (bits >> journey) & 1U;
    }
    [[nodiscard]] constexpr bool includes(Combination other) const {
        return (bits & other.bits) == other.bits;
    }
    [[nodiscard]] constexpr int size() const { return std::popcount(bits); }
    [[nodiscard]] constexpr Combination without(std::size_t journey) const {
        return {bits & ~(std::uint32_t{1} << journey)};
    }

    friend constexpr bool operator==(Combination, Combination) = default;
};

/// Ordered list of distinct journey labels.
class JourneySet {
public:
    JourneySet() = default;

    explicit JourneySet(std::vector<std::string> labels,
                        std::size_t max_journeys = kDefaultMaxJourneys)
        : labels_(std::move(labels)) {
        if (max_journeys > kJourneyLimit) {
            throw InvalidInput("max_journeys cannot exceed " + std::to_string(kJourneyLimit));
        }
        if (labels_.empty() || labels_.size() > max_journeys) {
            throw InvalidInput("journey count must be between 1 and " +
                               std::to_string(max_journeys) + ", got " +
                               std::to_string(labels_.size()));
        }
        for (std::size_t i = 0; i < labels_.size(); ++i) {
            const std::string& label = labels_[i];
            if (label.empty()) {
                throw InvalidInput("journey labels must be non-empty");
            }
            if (label.find('+') != std::string::npos || label == kEmptyCombinationKey) {
                throw InvalidInput("journey label '" + label + "' is reserved or contains '+'");
            }
            if (std::find(labels_.begin(), labels_.begin() + static_cast<std::ptrdiff_t>(i),
                          label) != labels_.begin() + static_cast<std::ptrdiff_t>(i)) {
                throw InvalidInput("duplicate journey label '" + label + "'");
            }
        }
    }

    [[nodiscard]] std::size_t size() const { return labels_.size(); }
    [[nodiscard]] const std::vector<std::string>& labels() const { return labels_; }
    [[nodiscard]] const std::string& label(std::size_t j) const { return labels_.at(j); }

    /// Number of combinations, including the empty one.
    [[nodiscard]] std::size_t combination_count() const { return std::size_t{1} << size(); }
    [[nodiscard]] Combination all() const {
        return {static_cast<std::uint32_t>(combination_count() - 1)};
    }

    [[nodiscard]] std::optional<std::size_t> index_of(std::string_view label) const {
        const auto it = std::find(labels_.begin(), labels_.end(), label);
        if (it == labels_.end()) {
            return std::nullopt;
        }
        return static_cast<std::size_t>(it - labels_.begin());
    }

    /// Member labels sorted lexicographically and joined with '+'; "none" when empty.
    [[nodiscard]] std::string key(Combination c) const {
        if (c.empty()) {
            return std::string(kEmptyCombinationKey);
        }
        std::vector<std::string> members;
        for (std::size_t j = 0; j < size(); ++j) {
            if (c.contains(j)) {
                members.push_back(labels_[j]);
            }
        }
        std::sort(members.begin(), members.end());
        std::string out;
        for (const auto& m : members) {
            if (!out.empty()) {
                out += '+';
            }
            out += m;
        }
        return out;
    }

    /// Inverse of key(); member order in the input is irrelevant.
    [[nodiscard]] Combination parse_key(std::string_view text) const {
        if (text == kEmptyCombinationKey) {
            return {};
        }
        Combination c;
        std::size_t start = 0;
        while (start <= text.size()) {
            const std::size_t end = std::min(text.find('+', start), text.size());
            const std::string_view part = text.substr(start, end - start);
            const auto idx = index_of(part);
            if (!idx) {
                throw InvalidInput("unknown journey '" + std::string(part) +
                                   "' in combination key '" + std::string(text) + "'");
            }
            if (c.contains(*idx)) {
                throw InvalidInput("journey repeated in combination key '" + std::string(text) +
                                   "'");
            }
            c.bits |= Combination::single(*idx).bits;
            start = end + 1;
        }
        return c;
    }

    friend bool operator==(const JourneySet&, const JourneySet&) = default;

private:
    std::vector<std::string> labels_;
};

/// Subsets of size >= 2 and <= max_order, ordered by size then lexicographically
/// over journey positions.
inline std::vector<Combination> interaction_subsets(std::size_t journey_count,
                                                    std::size_t max_order) {
    std::vector<Combination> out;
    const std::uint32_t total = std::uint32_t{1} << journey_count;
    for (std::size_t order = 2; order <= std::min(max_order, journey_count); ++order) {
        std::vector<Combination> level;
        for (std::uint32_t bits = 0; bits < total; ++bits) {
            if (static_cast<std::size_t>(std::popcount(bits)) == order) {
                level.push_back({bits});
            }
        }
        // Lexicographic over ascending member positions: compare member lists.
        auto members = [](Combination c) {
            std::vector<int> m;
            for (int j = 0; j < 32; ++j) {
                if (c.contains(static_cast<std::size_t>(j))) {
                    m.push_back(j);
                }
            }
            return m;
        };
        std::sort(level.begin(), level.end(),
                  [&](Combination a, Combination b) { return members(a) < members(b); });
        out.insert(out.end(), level.begin(), level.end());
    }
    return out;
}

}  // namespace liftlab
