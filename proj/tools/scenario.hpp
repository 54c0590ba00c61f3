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
 * \file scenario.hpp
 *
 * \brief Scenario files, cost-spec strings and built-in presets.
 */

#ifndef ROUTEBARGAIN_TOOLS_SCENARIO_HPP
#define ROUTEBARGAIN_TOOLS_SCENARIO_HPP

#include <routebargain/cost_model.hpp>
#include <routebargain/game.hpp>

#include <cstddef>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace routebargain::cli {

class ParseError : public std::runtime_error
{
public:
    ParseError(std::size_t line, const std::string& message)
        : std::runtime_error("line " + std::to_string(line) + ": " + message), line_(line)
    {
    }

    /// 1-based; 0 when unknown.
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class ValidationError : public std::runtime_error
{
public:
    ValidationError(std::string field, const std::string& reason)
        : std::runtime_error(field + ": " + reason), field_(std::move(field))
    {
    }

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

struct ScenarioUser
{
    double demand = 0.0;
    std::vector<CostModel> costs;
};

struct SolverOverrides
{
    std::optional<double> tol_kkt;
    std::optional<std::size_t> max_iters;
    /// Fixed flow-exchange gain floor; unset means half the surplus per user.
    std::optional<double> epsilon;
};

struct ScenarioFile
{
    std::string name;
    std::vector<std::optional<double>> links;
    std::vector<ScenarioUser> users;
    std::optional<std::vector<double>> weights;
    SolverOverrides solver;

    Game to_game() const;
};

/// "mm1(c)", "linear(a,b)" or "power(a,b,d)", optionally followed by "* w".
CostModel parse_cost_spec(const std::string& text);

/// YAML or JSON text; the game is built once to enforce its invariants.
ScenarioFile parse_scenario(const std::string& text);
ScenarioFile load_scenario_file(const std::string& path);

/// YAML text that parse_scenario reads back to an equal scenario.
std::string dump_scenario(const ScenarioFile& s);

using PresetParams = std::map<std::string, double>;

struct PresetInfo
{
    std::string name;
    std::string description;
    PresetParams defaults;
};

const std::vector<PresetInfo>& presets();

/// Builds a preset; unknown names or parameters raise ValidationError.
ScenarioFile make_preset(const std::string& name, const PresetParams& params = {});

} // namespace routebargain::cli

#endif // ROUTEBARGAIN_TOOLS_SCENARIO_HPP
