/*
 * Copyright 2026 The routebargain Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

/**
 * \file routebargain/errors.hpp
 *
 * \brief Exception types raised by the solvers and the game model.
 */

#ifndef ROUTEBARGAIN_ERRORS_HPP
#define ROUTEBARGAIN_ERRORS_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace routebargain {

class Error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// A strategy profile violates non-negativity or a demand constraint.
class InfeasibleProfile : public Error
{
public:
    using Error::Error;
};

/// A cost model was evaluated outside its domain (e.g. M/M/1 at or above capacity).
class DomainError : public Error
{
public:
    using Error::Error;
};

/// The links a user may use cannot carry the requested demand.
class CapacityExhausted : public Error
{
public:
    using Error::Error;
};

/// Game description is malformed (bad demand, wrong number of cost models, ...).
class InvalidGame : public Error
{
public:
    using Error::Error;
};

class NoConvergence : public Error
{
public:
    NoConvergence(const std::string& what, std::size_t iterations, double residual)
        : Error(what + " (iterations=" + std::to_string(iterations)
                + ", residual=" + std::to_string(residual) + ")"),
          iterations_(iterations),
          residual_(residual)
    {
    }

    std::size_t iterations() const noexcept { return iterations_; }
    double residual() const noexcept { return residual_; }

private:
    std::size_t iterations_;
    double residual_;
};

/// The flow-exchange construction could not give every user a strict gain.
class NotEssentialHere : public Error
{
public:
    using Error::Error;
};

class WrongArity : public Error
{
public:
    using Error::Error;
};

class NotIdentical : public Error
{
public:
    using Error::Error;
};

class NotHomogeneous : public Error
{
public:
    using Error::Error;
};

/// Internal invariant of the benchmark-strategy construction was violated.
class ConstructionFailed : public Error
{
public:
    using Error::Error;
};

} // namespace routebargain

#endif // ROUTEBARGAIN_ERRORS_HPP
