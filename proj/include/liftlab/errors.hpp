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

#include <stdexcept>
#include <string>

namespace liftlab {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Input violates a documented invariant (counts, proportions, labels, ...).
class InvalidInput : public Error {
public:
    using Error::Error;
};

/// Control conversion rate is zero, so a relative lift is undefined.
class ZeroBaseline : public Error {
public:
    ZeroBaseline() : Error("control conversion rate is zero; lift is undefined") {}
};

class NegativeVariance : public Error {
public:
    explicit NegativeVariance(double value)
        : Error("delta-method quadratic form is negative: " + std::to_string(value)) {}
};

class NonFiniteObjective : public Error {
public:
    using Error::Error;
};

class DegenerateProblem : public Error {
public:
    using Error::Error;
};

class AllFitsFailed : public Error {
public:
    using Error::Error;
};

/// World specification cannot produce valid conversion probabilities.
class InvalidWorld : public Error {
public:
    using Error::Error;
};

}  // namespace liftlab
