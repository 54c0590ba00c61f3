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

#include "record.hpp"

#include "scenario.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>

namespace routebargain::cli {

namespace {

double round12(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return std::strtod(buf, nullptr);
}

Json vector_json(const std::vector<double>& v)
{
    Json a = Json::array();
    for (double x : v) {
        a.push_back(number_json(x));
    }
    return a;
}

std::vector<double> vector_from(const Json& j)
{
    std::vector<double> v;
    for (const auto& x : j) {
        v.push_back(number_from_json(x));
    }
    return v;
}

Json matrix_json(const FlowMatrix& m)
{
    Json a = Json::array();
    for (const auto& row : m) {
        a.push_back(vector_json(row));
    }
    return a;
}

FlowMatrix matrix_from(const Json& j)
{
    FlowMatrix m;
    for (const auto& row : j) {
        m.push_back(vector_from(row));
    }
    return m;
}

Json costs_json(const CostVector& c)
{
    return Json{{"per_user", vector_json(c.per_user)}, {"system", number_json(c.system)}};
}

CostVector costs_from(const Json& j)
{
    return {vector_from(j.at("per_user")), number_from_json(j.at("system"))};
}

BargainMethod method_from(const std::string& s)
{
    for (auto m : {BargainMethod::Proportional, BargainMethod::FlowExchange, BargainMethod::TwoUserClosedForm,
                   BargainMethod::IdenticalUsers, BargainMethod::NashProductAscent, BargainMethod::CoincidesWithNEP}) {
        if (s == to_string(m)) {
            return m;
        }
    }
    throw ValidationError("method", "unknown bargaining method '" + s + "'");
}

Json prices_json(const PriceReport& p)
{
    Json j;
    j["poa"] = number_json(p.poa);
    j["pos"] = number_json(p.pos);
    j["poi"] = number_json(p.poi);
    j["poh_per_user"] = vector_json(p.poh_per_user);
    j["poh"] = number_json(p.poh);
    Json b;
    b["poh_bound_per_user"] = vector_json(p.bounds.poh_bound_per_user);
    if (p.bounds.weighted_envelope) {
        b["weighted_envelope"] = Json::array(
            {number_json(p.bounds.weighted_envelope->first), number_json(p.bounds.weighted_envelope->second)});
    }
    j["bounds"] = b;
    if (p.weighted_pos) {
        j["weighted_pos"] = number_json(*p.weighted_pos);
    }
    j["method"] = to_string(p.method);
    j["nbs_certainty"] = to_string(p.nbs_certainty);
    return j;
}

PriceReport prices_from(const Json& j)
{
    PriceReport p;
    p.poa = number_from_json(j.at("poa"));
    p.pos = number_from_json(j.at("pos"));
    p.poi = number_from_json(j.at("poi"));
    p.poh_per_user = vector_from(j.at("poh_per_user"));
    p.poh = number_from_json(j.at("poh"));
    const auto& b = j.at("bounds");
    p.bounds.poh_bound_per_user = vector_from(b.at("poh_bound_per_user"));
    if (b.contains("weighted_envelope")) {
        const auto& e = b.at("weighted_envelope");
        p.bounds.weighted_envelope = std::pair{number_from_json(e.at(0)), number_from_json(e.at(1))};
    }
    if (j.contains("weighted_pos")) {
        p.weighted_pos = number_from_json(j.at("weighted_pos"));
    }
    p.method = method_from(j.at("method").get<std::string>());
    p.nbs_certainty = j.at("nbs_certainty").get<std::string>() == to_string(NbsCertainty::SingleRun)
        ? NbsCertainty::SingleRun
        : NbsCertainty::MultiStartAgreement;
    return p;
}

} // namespace

Json number_json(double v)
{
    if (std::isinf(v)) {
        return v > 0 ? "inf" : "-inf";
    }
    if (std::isnan(v)) {
        return nullptr;
    }
    return round12(v);
}

double number_from_json(const Json& j)
{
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "inf") {
            return infinity;
        }
        if (s == "-inf") {
            return -infinity;
        }
        throw ValidationError("number", "unexpected string '" + s + "'");
    }
    if (j.is_null()) {
        return std::nan("");
    }
    return j.get<double>();
}

Json to_json(const ResultRecord& r)
{
    Json j;
    j["scenario"] = r.scenario;
    j["command"] = r.command;
    Json profiles = Json::object();
    if (r.nep) {
        profiles["nep"] = matrix_json(*r.nep);
    }
    if (r.optimum) {
        profiles["optimum"] = matrix_json(*r.optimum);
    }
    if (r.bargained) {
        profiles["bargained"] = matrix_json(*r.bargained);
    }
    j["profiles"] = profiles;
    Json costs = Json::object();
    if (r.nep_costs) {
        costs["nep"] = costs_json(*r.nep_costs);
    }
    if (r.optimum_costs) {
        costs["optimum"] = costs_json(*r.optimum_costs);
    }
    if (r.bargained_costs) {
        costs["bargained"] = costs_json(*r.bargained_costs);
    }
    j["costs"] = costs;
    if (r.bargain) {
        j["bargain"] = Json{{"method", r.bargain->method},
                            {"certainty", r.bargain->certainty},
                            {"nash_product", number_json(r.bargain->nash_product)},
                            {"exchange_events", r.bargain->exchange_events},
                            {"iterations", r.bargain->iterations}};
    }
    if (r.prices) {
        j["prices"] = prices_json(*r.prices);
    }
    Json diag = Json::object();
    for (const auto& [k, d] : r.diagnostics) {
        diag[k] = Json{{"iterations", d.iterations},
                       {"kkt_residual", number_json(d.kkt_residual)},
                       {"converged", d.converged}};
    }
    j["diagnostics"] = diag;
    return j;
}

ResultRecord record_from_json(const Json& j)
{
    ResultRecord r;
    try {
        r.scenario = j.at("scenario").get<std::string>();
        r.command = j.at("command").get<std::string>();
        const auto& p = j.at("profiles");
        if (p.contains("nep")) {
            r.nep = matrix_from(p.at("nep"));
        }
        if (p.contains("optimum")) {
            r.optimum = matrix_from(p.at("optimum"));
        }
        if (p.contains("bargained")) {
            r.bargained = matrix_from(p.at("bargained"));
        }
        const auto& c = j.at("costs");
        if (c.contains("nep")) {
            r.nep_costs = costs_from(c.at("nep"));
        }
        if (c.contains("optimum")) {
            r.optimum_costs = costs_from(c.at("optimum"));
        }
        if (c.contains("bargained")) {
            r.bargained_costs = costs_from(c.at("bargained"));
        }
        if (j.contains("bargain")) {
            const auto& b = j.at("bargain");
            r.bargain = BargainInfo{b.at("method").get<std::string>(), b.at("certainty").get<std::string>(),
                                    number_from_json(b.at("nash_product")),
                                    b.at("exchange_events").get<std::size_t>(), b.at("iterations").get<std::size_t>()};
        }
        if (j.contains("prices")) {
            r.prices = prices_from(j.at("prices"));
        }
        for (const auto& [k, d] : j.at("diagnostics").items()) {
            r.diagnostics[k] = SolveDiagnostics{d.at("iterations").get<std::size_t>(),
                                                number_from_json(d.at("kkt_residual")),
                                                d.at("converged").get<bool>()};
        }
    } catch (const Json::exception& e) {
        throw ValidationError("record", e.what());
    }
    return r;
}

FlowMatrix flows_in_input_order(const Game& game, const StrategyProfile& p)
{
    FlowMatrix m(p.num_users(), std::vector<double>(game.num_links(), 0.0));
    for (std::size_t i = 0; i < p.num_users(); ++i) {
        for (std::size_t l = 0; l < game.num_links(); ++l) {
            m[i][game.links()[l].index - 1] = p(i, l);
        }
    }
    return m;
}

StrategyProfile profile_from_input_order(const Game& game, const FlowMatrix& m)
{
    if (m.size() != game.num_users()) {
        throw ValidationError("profile", "expected one row per user");
    }
    StrategyProfile p(game.num_users(), game.num_links());
    for (std::size_t i = 0; i < m.size(); ++i) {
        if (m[i].size() != game.num_links()) {
            throw ValidationError("profile", "expected one column per link");
        }
        for (std::size_t l = 0; l < game.num_links(); ++l) {
            p(i, l) = m[i][game.links()[l].index - 1];
        }
    }
    return p;
}

void validate_record(const Game& game, const ResultRecord& r)
{
    auto check = [&](const std::optional<FlowMatrix>& m, const char* name) {
        if (!m) {
            return;
        }
        // Stored flows carry 12 significant digits, so allow that much slack.
        const auto p = profile_from_input_order(game, *m);
        for (std::size_t i = 0; i < game.num_users(); ++i) {
            double sum = 0.0;
            for (std::size_t l = 0; l < game.num_links(); ++l) {
                if (p(i, l) < 0.0) {
                    throw ValidationError(std::string("profiles.") + name, "negative flow");
                }
                sum += p(i, l);
            }
            if (std::abs(sum - game.demand(i)) > 1e-10 * std::max(1.0, game.demand(i)) * game.num_links()) {
                throw ValidationError(std::string("profiles.") + name, "flows do not meet the demand");
            }
        }
        const auto c = detail::costs_unchecked(game, p);
        if (!std::isfinite(c.system)) {
            throw ValidationError(std::string("profiles.") + name, "profile exceeds link capacity");
        }
    };
    check(r.nep, "nep");
    check(r.optimum, "optimum");
    check(r.bargained, "bargained");
}

} // namespace routebargain::cli
