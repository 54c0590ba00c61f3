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
 * \file record.hpp
 *
 * \brief Machine-readable results of a single run.
 */

#ifndef ROUTEBARGAIN_TOOLS_RECORD_HPP
#define ROUTEBARGAIN_TOOLS_RECORD_HPP

#include <routebargain/bargaining.hpp>
#include <routebargain/game.hpp>
#include <routebargain/metrics.hpp>
#include <routebargain/solvers.hpp>

#include <nlohmann/json.hpp>

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace routebargain::cli {

using Json = nlohmann::ordered_json;

/// Flows per user, links in the order the scenario lists them.
using FlowMatrix = std::vector<std::vector<double>>;

struct SolveDiagnostics
{
    std::size_t iterations = 0;
    double kkt_residual = 0.0;
    bool converged = true;

    bool operator==(const SolveDiagnostics&) const = default;
};

struct BargainInfo
{
    std::string method;
    std::string certainty;
    double nash_product = 0.0;
    std::size_t exchange_events = 0;
    std::size_t iterations = 0;

    bool operator==(const BargainInfo&) const = default;
};

struct ResultRecord
{
    std::string scenario;
    std::string command;
    std::optional<FlowMatrix> nep;
    std::optional<FlowMatrix> optimum;
    std::optional<FlowMatrix> bargained;
    std::optional<CostVector> nep_costs;
    std::optional<CostVector> optimum_costs;
    std::optional<CostVector> bargained_costs;
    std::optional<BargainInfo> bargain;
    std::optional<PriceReport> prices;
    std::map<std::string, SolveDiagnostics> diagnostics;
};

/// Values rounded to 12 significant digits; +-inf as "inf" / "-inf".
Json number_json(double v);
double number_from_json(const Json& j);

Json to_json(const ResultRecord& r);
ResultRecord record_from_json(const Json& j);

/// Flow matrix in scenario link order.
FlowMatrix flows_in_input_order(const Game& game, const StrategyProfile& p);
StrategyProfile profile_from_input_order(const Game& game, const FlowMatrix& m);

/// Re-checks every flow matrix of `r` against the game's feasibility rules.
void validate_record(const Game& game, const ResultRecord& r);

} // namespace routebargain::cli

#endif // ROUTEBARGAIN_TOOLS_RECORD_HPP
