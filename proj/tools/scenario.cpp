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

#include "scenario.hpp"

#include <routebargain/errors.hpp>

#include <yaml-cpp/yaml.h>

#include <charconv>
#include <cmath>
#include <fstream>
#include <regex>
#include <sstream>

namespace routebargain::cli {

namespace {

double parse_number(const std::string& s, const std::string& what)
{
    const char* b = s.data();
    const char* e = s.data() + s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(*b))) {
        ++b;
    }
    while (e > b && std::isspace(static_cast<unsigned char>(e[-1]))) {
        --e;
    }
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(b, e, v);
    if (ec != std::errc() || ptr != e || b == e) {
        throw ValidationError(what, "'" + s + "' is not a number");
    }
    return v;
}

std::size_t line_of(const YAML::Node& n)
{
    return static_cast<std::size_t>(n.Mark().line + 1);
}

double number_at(const YAML::Node& n, const std::string& field)
{
    if (!n.IsScalar()) {
        throw ValidationError(field, "expected a number");
    }
    return parse_number(n.Scalar(), field);
}

std::string format_number(double v)
{
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

std::string spec_string(const CostModel& m)
{
    std::string s = std::visit(
        [](const auto& f) -> std::string {
            using F = std::decay_t<decltype(f)>;
            if constexpr (std::is_same_v<F, MM1>) {
                return "mm1(" + format_number(f.capacity) + ")";
            } else if constexpr (std::is_same_v<F, Linear>) {
                return "linear(" + format_number(f.a) + ", " + format_number(f.b) + ")";
            } else {
                return "power(" + format_number(f.a) + ", " + format_number(f.b) + ", " + format_number(f.d) + ")";
            }
        },
        m.form());
    if (m.weight() != 1.0) {
        s += " * " + format_number(m.weight());
    }
    return s;
}

} // namespace

CostModel parse_cost_spec(const std::string& text)
{
    static const std::regex re(R"(^\s*(mm1|linear|power)\s*\(([^()]*)\)\s*(?:\*\s*(\S+)\s*)?$)",
                               std::regex::icase);
    std::smatch m;
    if (!std::regex_match(text, m, re)) {
        throw ValidationError("cost", "cannot parse cost spec '" + text + "'");
    }
    std::string kind = m[1].str();
    for (auto& c : kind) {
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    std::vector<double> args;
    std::stringstream ss(m[2].str());
    for (std::string item; std::getline(ss, item, ',');) {
        args.push_back(parse_number(item, "cost"));
    }
    const double w = m[3].matched ? parse_number(m[3].str(), "cost") : 1.0;
    const std::size_t want = kind == "mm1" ? 1 : kind == "linear" ? 2 : 3;
    if (args.size() != want) {
        throw ValidationError("cost", kind + " takes " + std::to_string(want) + " argument(s)");
    }
    try {
        if (kind == "mm1") {
            return CostModel::mm1(args[0], w);
        }
        if (kind == "linear") {
            return CostModel::linear(args[0], args[1], w);
        }
        return CostModel::power(args[0], args[1], args[2], w);
    } catch (const Error& e) {
        throw ValidationError("cost", e.what());
    }
}

Game ScenarioFile::to_game() const
{
    std::vector<LinkSpec> ls;
    for (const auto& c : links) {
        ls.push_back({c, 0});
    }
    std::vector<UserSpec> us;
    for (const auto& u : users) {
        us.push_back({u.demand, u.costs, 0});
    }
    return Game(std::move(ls), std::move(us));
}

ScenarioFile parse_scenario(const std::string& text)
{
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::ParserException& e) {
        throw ParseError(static_cast<std::size_t>(e.mark.line + 1), e.msg);
    }
    if (!root.IsMap()) {
        throw ParseError(root ? line_of(root) : 1, "scenario must be a mapping");
    }

    ScenarioFile s;
    try {
        s.name = root["name"] ? root["name"].as<std::string>() : "scenario";

        const auto links = root["links"];
        if (!links || !links.IsSequence() || links.size() == 0) {
            throw ValidationError("links", "expected a non-empty list");
        }
        for (std::size_t l = 0; l < links.size(); ++l) {
            const std::string field = "links[" + std::to_string(l) + "].capacity";
            const auto n = links[l];
            YAML::Node cap = n.IsMap() ? n["capacity"] : n;
            if (!cap || cap.IsNull() || (cap.IsScalar() && (cap.Scalar() == "null" || cap.Scalar() == "~"))) {
                s.links.emplace_back(std::nullopt);
                continue;
            }
            const double c = number_at(cap, field);
            if (!(c > 0.0) || !std::isfinite(c)) {
                throw ValidationError(field, "capacity must be positive");
            }
            s.links.emplace_back(c);
        }

        const auto users = root["users"];
        if (!users || !users.IsSequence() || users.size() == 0) {
            throw ValidationError("users", "expected a non-empty list");
        }
        for (std::size_t i = 0; i < users.size(); ++i) {
            const std::string base = "users[" + std::to_string(i) + "]";
            const auto u = users[i];
            if (!u.IsMap() || !u["demand"]) {
                throw ValidationError(base + ".demand", "missing");
            }
            ScenarioUser su;
            su.demand = number_at(u["demand"], base + ".demand");
            if (!(su.demand >= 0.0) || !std::isfinite(su.demand)) {
                throw ValidationError(base + ".demand", "demand must be non-negative");
            }
            const auto costs = u["costs"];
            if (!costs) {
                throw ValidationError(base + ".costs", "missing");
            }
            auto one = [&](const YAML::Node& n, const std::string& field) {
                try {
                    return parse_cost_spec(n.as<std::string>());
                } catch (const ValidationError& e) {
                    throw ValidationError(field, e.what());
                }
            };
            if (costs.IsScalar()) {
                const auto m = one(costs, base + ".costs");
                su.costs.assign(s.links.size(), m);
            } else if (costs.IsSequence()) {
                for (std::size_t l = 0; l < costs.size(); ++l) {
                    su.costs.push_back(one(costs[l], base + ".costs[" + std::to_string(l) + "]"));
                }
            } else {
                throw ValidationError(base + ".costs", "expected a cost spec or a list of them");
            }
            if (su.costs.size() != s.links.size()) {
                throw ValidationError(base + ".costs", "expected one cost spec per link");
            }
            s.users.push_back(std::move(su));
        }

        if (const auto w = root["weights"]) {
            if (!w.IsSequence() || w.size() != s.users.size()) {
                throw ValidationError("weights", "expected one weight per user");
            }
            std::vector<double> ws;
            double sum = 0.0;
            for (std::size_t i = 0; i < w.size(); ++i) {
                ws.push_back(number_at(w[i], "weights[" + std::to_string(i) + "]"));
                if (!(ws.back() > 0.0)) {
                    throw ValidationError("weights[" + std::to_string(i) + "]", "weights must be positive");
                }
                sum += ws.back();
            }
            if (std::abs(sum - 1.0) > 1e-9) {
                throw ValidationError("weights", "weights must sum to 1");
            }
            s.weights = std::move(ws);
        }

        if (const auto sv = root["solver"]) {
            if (!sv.IsMap()) {
                throw ValidationError("solver", "expected a mapping");
            }
            if (sv["tol_kkt"]) {
                const double t = number_at(sv["tol_kkt"], "solver.tol_kkt");
                if (!(t > 0.0)) {
                    throw ValidationError("solver.tol_kkt", "must be positive");
                }
                s.solver.tol_kkt = t;
            }
            if (sv["max_iters"]) {
                const double k = number_at(sv["max_iters"], "solver.max_iters");
                if (!(k >= 1.0) || k != std::floor(k)) {
                    throw ValidationError("solver.max_iters", "must be a positive integer");
                }
                s.solver.max_iters = static_cast<std::size_t>(k);
            }
            if (sv["epsilon_rule"]) {
                const auto rule = sv["epsilon_rule"].as<std::string>();
                if (rule != "half-surplus") {
                    const double eps = parse_number(rule, "solver.epsilon_rule");
                    if (!(eps > 0.0)) {
                        throw ValidationError("solver.epsilon_rule", "must be 'half-surplus' or a positive number");
                    }
                    s.solver.epsilon = eps;
                }
            }
        }
    } catch (const YAML::Exception& e) {
        throw ParseError(static_cast<std::size_t>(e.mark.line + 1), e.msg);
    }

    try {
        (void)s.to_game();
    } catch (const Error& e) {
        throw ValidationError("game", e.what());
    }
    return s;
}

ScenarioFile load_scenario_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in) {
        throw ValidationError("scenario", "cannot open '" + path + "'");
    }
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_scenario(buf.str());
}

std::string dump_scenario(const ScenarioFile& s)
{
    YAML::Emitter out;
    out << YAML::BeginMap;
    out << YAML::Key << "name" << YAML::Value << s.name;
    out << YAML::Key << "links" << YAML::Value << YAML::BeginSeq;
    for (const auto& c : s.links) {
        out << YAML::BeginMap << YAML::Key << "capacity" << YAML::Value;
        if (c) {
            out << format_number(*c);
        } else {
            out << YAML::Null;
        }
        out << YAML::EndMap;
    }
    out << YAML::EndSeq;
    out << YAML::Key << "users" << YAML::Value << YAML::BeginSeq;
    for (const auto& u : s.users) {
        out << YAML::BeginMap;
        out << YAML::Key << "demand" << YAML::Value << format_number(u.demand);
        out << YAML::Key << "costs" << YAML::Value << YAML::Flow << YAML::BeginSeq;
        for (const auto& m : u.costs) {
            out << spec_string(m);
        }
        out << YAML::EndSeq << YAML::EndMap;
    }
    out << YAML::EndSeq;
    if (s.weights) {
        out << YAML::Key << "weights" << YAML::Value << YAML::Flow << YAML::BeginSeq;
        for (double w : *s.weights) {
            out << format_number(w);
        }
        out << YAML::EndSeq;
    }
    if (s.solver.tol_kkt || s.solver.max_iters || s.solver.epsilon) {
        out << YAML::Key << "solver" << YAML::Value << YAML::BeginMap;
        if (s.solver.tol_kkt) {
            out << YAML::Key << "tol_kkt" << YAML::Value << format_number(*s.solver.tol_kkt);
        }
        if (s.solver.max_iters) {
            out << YAML::Key << "max_iters" << YAML::Value << *s.solver.max_iters;
        }
        if (s.solver.epsilon) {
            out << YAML::Key << "epsilon_rule" << YAML::Value << format_number(*s.solver.epsilon);
        }
        out << YAML::EndMap;
    }
    out << YAML::EndMap;
    return std::string(out.c_str()) + "\n";
}

const std::vector<PresetInfo>& presets()
{
    static const std::vector<PresetInfo> all = {
        {"paper-nbs-3user", "links mm1(20), mm1(10); demands 0.1, 7.45, 7.45", {}},
        {"paper-hetero", "two users with different per-link costs; eps in (0, 0.1)", {{"eps", 0.05}}},
        {"paper-poa-growth", "N identical users on linear(1, eps) and power(0, 1, N)", {{"N", 10}, {"eps", 0.01}}},
    };
    return all;
}

ScenarioFile make_preset(const std::string& name, const PresetParams& params)
{
    const PresetInfo* info = nullptr;
    for (const auto& p : presets()) {
        if (p.name == name) {
            info = &p;
        }
    }
    if (!info) {
        throw ValidationError("preset", "unknown preset '" + name + "'");
    }
    PresetParams v = info->defaults;
    for (const auto& [k, x] : params) {
        if (!v.count(k)) {
            throw ValidationError("preset." + k, "not a parameter of " + name);
        }
        v[k] = x;
    }

    ScenarioFile s;
    s.name = name;
    if (name == "paper-nbs-3user") {
        s.links = {std::nullopt, std::nullopt};
        for (double r : {0.1, 7.45, 7.45}) {
            s.users.push_back({r, {CostModel::mm1(20), CostModel::mm1(10)}});
        }
    } else if (name == "paper-hetero") {
        const double eps = v["eps"];
        if (!(eps > 0.0 && eps < 0.1)) {
            throw ValidationError("preset.eps", "must lie in (0, 0.1)");
        }
        s.links = {std::nullopt, std::nullopt};
        s.users.push_back({0.5, {CostModel::linear(0, 1), CostModel::linear(1, 1, 2)}});
        s.users.push_back({0.5, {CostModel::mm1(1 + eps), CostModel::linear(1, 1, 2 / (eps * eps))}});
    } else {
        const double n = v["N"];
        const double eps = v["eps"];
        if (!(n >= 1.0) || n != std::floor(n)) {
            throw ValidationError("preset.N", "must be a positive integer");
        }
        if (!(eps > 0.0)) {
            throw ValidationError("preset.eps", "must be positive");
        }
        const auto N = static_cast<std::size_t>(n);
        s.links = {std::nullopt, std::nullopt};
        for (std::size_t i = 0; i < N; ++i) {
            s.users.push_back({1.0 / n, {CostModel::linear(1, eps), CostModel::power(0, 1, n)}});
        }
    }
    return s;
}

} // namespace routebargain::cli
