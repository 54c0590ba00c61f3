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

#include "cli.hpp"

#include <routebargain/routebargain.hpp>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

namespace routebargain::cli {

namespace {

struct Options
{
    std::string scenario;
    std::string preset;
    std::string positional;
    std::vector<std::string> sets;
    std::string param;
    std::optional<double> tol;
    std::optional<std::size_t> max_iters;
    std::size_t jobs = 0;
    std::uint64_t seed = 0;
    std::string out;
    std::string format = "record";
};

std::shared_ptr<spdlog::logger> logger()
{
    static std::once_flag once;
    static std::shared_ptr<spdlog::logger> log;
    std::call_once(once, [] {
        log = spdlog::get("routebargain");
        if (!log) {
            log = spdlog::stderr_logger_mt("routebargain");
        }
        log->set_pattern("[%l] %v");
        const char* env = std::getenv("ROUTEBARGAIN_LOG");
        const std::string level = env ? env : "error";
        if (level == "debug") {
            log->set_level(spdlog::level::debug);
        } else if (level == "info") {
            log->set_level(spdlog::level::info);
        } else {
            log->set_level(spdlog::level::err);
        }
    });
    return log;
}

std::pair<std::string, double> parse_assignment(const std::string& text, const char* what)
{
    const auto eq = text.find('=');
    if (eq == std::string::npos || eq == 0) {
        throw ValidationError(what, "expected key=value, got '" + text + "'");
    }
    const std::string key = text.substr(0, eq);
    const std::string value = text.substr(eq + 1);
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(value, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != value.size()) {
        throw ValidationError(what, "'" + value + "' is not a number");
    }
    return {key, v};
}

PresetParams preset_params(const Options& o)
{
    PresetParams p;
    for (const auto& s : o.sets) {
        p.insert_or_assign(parse_assignment(s, "--set").first, parse_assignment(s, "--set").second);
    }
    return p;
}

std::string preset_name(const Options& o)
{
    if (!o.preset.empty() && !o.positional.empty() && o.preset != o.positional) {
        throw ValidationError("--preset", "given twice with different names");
    }
    return o.preset.empty() ? o.positional : o.preset;
}

ScenarioFile resolve_scenario(const Options& o)
{
    const auto preset = preset_name(o);
    if (!o.scenario.empty()) {
        if (!preset.empty()) {
            throw ValidationError("--scenario", "cannot be combined with a preset");
        }
        if (!o.sets.empty()) {
            throw ValidationError("--set", "only applies to presets");
        }
        return load_scenario_file(o.scenario);
    }
    if (preset.empty()) {
        throw ValidationError("scenario", "give --scenario FILE or --preset NAME");
    }
    return make_preset(preset, preset_params(o));
}

SolverOptions solver_options(const Options& o, const ScenarioFile& s)
{
    SolverOptions opt;
    if (s.solver.tol_kkt) {
        opt.tol_kkt = *s.solver.tol_kkt;
    }
    if (s.solver.max_iters) {
        opt.max_iters = *s.solver.max_iters;
    }
    if (o.tol) {
        opt.tol_kkt = *o.tol;
    }
    if (o.max_iters) {
        opt.max_iters = *o.max_iters;
    }
    return opt;
}

BargainOptions bargain_options(const Options& o, const ScenarioFile& s)
{
    BargainOptions opt;
    opt.seed = o.seed;
    opt.exchange_epsilon = s.solver.epsilon;
    return opt;
}

SolveDiagnostics diagnostics_of(const SolveReport& r)
{
    return {r.iterations, r.kkt_residual, r.converged};
}

BargainInfo bargain_info(const BargainOutcome& b)
{
    return {to_string(b.method), to_string(b.certainty), b.nash_product, b.exchange_events, b.iterations};
}

ResultRecord full_record(const Game& game, const std::string& name, const std::string& command, const Analysis& a)
{
    ResultRecord r;
    r.scenario = name;
    r.command = command;
    r.nep = flows_in_input_order(game, a.nep.profile);
    r.optimum = flows_in_input_order(game, a.optimum.profile);
    r.bargained = flows_in_input_order(game, a.outcome.profile);
    r.nep_costs = a.nep_costs;
    r.optimum_costs = evaluate_cost(game, a.optimum.profile);
    r.bargained_costs = a.outcome.costs;
    r.bargain = bargain_info(a.outcome);
    r.diagnostics["nep"] = diagnostics_of(a.nep);
    r.diagnostics["optimum"] = diagnostics_of(a.optimum);
    return r;
}

std::string fmt12(double v)
{
    if (std::isinf(v)) {
        return v > 0 ? "inf" : "-inf";
    }
    std::ostringstream os;
    os << std::setprecision(12) << v;
    return os.str();
}

void write_profile_table(std::ostream& os, const FlowMatrix& m, const CostVector& c)
{
    os << "user";
    for (std::size_t l = 0; l < (m.empty() ? 0 : m.front().size()); ++l) {
        os << ",link" << l + 1;
    }
    os << ",cost\n";
    for (std::size_t i = 0; i < m.size(); ++i) {
        os << i + 1;
        for (double x : m[i]) {
            os << ',' << fmt12(x);
        }
        os << ',' << fmt12(c.per_user[i]) << '\n';
    }
    os << "system";
    for (std::size_t l = 0; l < (m.empty() ? 0 : m.front().size()); ++l) {
        os << ',';
    }
    os << ',' << fmt12(c.system) << '\n';
}

struct SweepRow
{
    double value = 0.0;
    bool converged = false;
    std::optional<ResultRecord> record;
    std::string error;
};

const char* table_header = "parameter,poa,pos,poi,poh,converged\n";

void write_table_row(std::ostream& os, const std::string& param, const PriceReport* p, bool converged)
{
    os << param;
    if (p) {
        os << ',' << fmt12(p->poa) << ',' << fmt12(p->pos) << ',' << fmt12(p->poi) << ',' << fmt12(p->poh);
    } else {
        os << ",,,,";
    }
    os << ',' << (converged ? "true" : "false") << '\n';
}

int command_solve(const std::string& command, const Options& o, std::ostream& out)
{
    const auto sc = resolve_scenario(o);
    const auto game = sc.to_game();
    const auto sopt = solver_options(o, sc);
    auto log = logger();
    log->info("{}: {} users, {} links, {}", sc.name, game.num_users(), game.num_links(),
              to_string(game.homogeneity()));

    ResultRecord r;
    r.scenario = sc.name;
    r.command = command;
    if (command == "nep") {
        const auto nep = nash_equilibrium(game, sopt);
        log->info("nep: {} sweeps, residual {}", nep.iterations, nep.kkt_residual);
        r.nep = flows_in_input_order(game, nep.profile);
        r.nep_costs = evaluate_cost(game, nep.profile);
        r.diagnostics["nep"] = diagnostics_of(nep);
    } else if (command == "opt") {
        const auto opt = social_optimum(game, sc.weights, sopt);
        log->info("opt: {} iterations, residual {}", opt.iterations, opt.kkt_residual);
        r.optimum = flows_in_input_order(game, opt.profile);
        r.optimum_costs = evaluate_cost(game, opt.profile);
        r.diagnostics["optimum"] = diagnostics_of(opt);
    } else if (command == "nbs") {
        const auto nep = nash_equilibrium(game, sopt);
        const auto opt = social_optimum(game, std::nullopt, sopt);
        const auto b = bargain(game, nep, opt, bargain_options(o, sc));
        log->info("nbs: {}", to_string(b.method));
        r.nep = flows_in_input_order(game, nep.profile);
        r.optimum = flows_in_input_order(game, opt.profile);
        r.bargained = flows_in_input_order(game, b.profile);
        r.nep_costs = evaluate_cost(game, nep.profile);
        r.optimum_costs = evaluate_cost(game, opt.profile);
        r.bargained_costs = b.costs;
        r.bargain = bargain_info(b);
        r.diagnostics["nep"] = diagnostics_of(nep);
        r.diagnostics["optimum"] = diagnostics_of(opt);
    } else {
        AnalysisOptions aopt{sopt, bargain_options(o, sc), sc.weights};
        const auto a = analyze(game, aopt);
        r = full_record(game, sc.name, command, a);
        r.prices = a.report;
        log->info("metrics: poa {} pos {} poi {} poh {}", a.report.poa, a.report.pos, a.report.poi, a.report.poh);
    }
    validate_record(game, r);

    if (o.format == "table") {
        if (r.prices) {
            out << table_header;
            write_table_row(out, "", &*r.prices, true);
        } else if (r.bargained) {
            write_profile_table(out, *r.bargained, *r.bargained_costs);
        } else if (r.nep) {
            write_profile_table(out, *r.nep, *r.nep_costs);
        } else {
            write_profile_table(out, *r.optimum, *r.optimum_costs);
        }
    } else {
        out << to_json(r).dump(2) << '\n';
    }
    return exit_ok;
}

int command_sweep(const Options& o, std::ostream& out)
{
    if (o.param.empty()) {
        throw ValidationError("--param", "sweep needs --param NAME=a..b[:step]");
    }
    if (!o.scenario.empty()) {
        throw ValidationError("--scenario", "sweeps run over preset parameters; use --preset");
    }
    const auto grid = parse_param_grid(o.param);
    const auto name = preset_name(o);
    auto base = preset_params(o);
    // Validate the preset and parameter name before starting any work.
    {
        auto probe = base;
        probe[grid.name] = grid.values.front();
        (void)make_preset(name, probe);
    }

    std::vector<SweepRow> rows(grid.values.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t k = next++; k < rows.size(); k = next++) {
            auto& row = rows[k];
            row.value = grid.values[k];
            auto params = base;
            params[grid.name] = row.value;
            try {
                const auto sc = make_preset(name, params);
                const auto game = sc.to_game();
                AnalysisOptions aopt{solver_options(o, sc), bargain_options(o, sc), sc.weights};
                const auto a = analyze(game, aopt);
                auto r = full_record(game, sc.name, "sweep", a);
                r.prices = a.report;
                row.record = std::move(r);
                row.converged = true;
                logger()->info("sweep {}={}: poa {}", grid.name, row.value, a.report.poa);
            } catch (const NoConvergence& e) {
                row.error = e.what();
                logger()->error("sweep {}={}: {}", grid.name, row.value, e.what());
            }
        }
    };
    std::size_t jobs = o.jobs ? o.jobs : std::max(1u, std::thread::hardware_concurrency());
    jobs = std::min(jobs, rows.size());
    std::vector<std::thread> pool;
    for (std::size_t t = 1; t < jobs; ++t) {
        pool.emplace_back(worker);
    }
    worker();
    for (auto& t : pool) {
        t.join();
    }

    bool all = true;
    if (o.format == "table") {
        out << table_header;
    }
    Json arr = Json::array();
    for (const auto& row : rows) {
        all = all && row.converged;
        const std::string label = grid.name + "=" + fmt12(row.value);
        if (o.format == "table") {
            write_table_row(out, label, row.record ? &*row.record->prices : nullptr, row.converged);
        } else {
            Json j;
            j["parameter"] = Json{{grid.name, number_json(row.value)}};
            j["converged"] = row.converged;
            if (row.record) {
                j["record"] = to_json(*row.record);
            } else {
                j["error"] = row.error;
            }
            arr.push_back(std::move(j));
        }
    }
    if (o.format != "table") {
        out << arr.dump(2) << '\n';
    }
    return all ? exit_ok : exit_no_convergence;
}

int command_paper_examples(const Options& o, std::ostream& out)
{
    const auto checks = run_paper_checks(o.seed);
    bool all = true;
    Json arr = Json::array();
    for (const auto& c : checks) {
        all = all && c.passed;
        if (o.format == "table") {
            out << (c.passed ? "PASS" : "FAIL") << "  " << c.name << "  value=" << fmt12(c.value)
                << "  expected " << c.expected << '\n';
        } else {
            arr.push_back(Json{{"check", c.name},
                               {"passed", c.passed},
                               {"value", number_json(c.value)},
                               {"expected", c.expected}});
        }
    }
    if (o.format != "table") {
        out << Json{{"checks", arr}, {"passed", all}}.dump(2) << '\n';
    }
    return all ? exit_ok : exit_check_failed;
}

double link_total_input(const Game& game, const StrategyProfile& p, std::size_t input_link)
{
    for (std::size_t l = 0; l < game.num_links(); ++l) {
        if (game.links()[l].index == input_link) {
            return p.link_total(l);
        }
    }
    return 0.0;
}

} // namespace

ParamGrid parse_param_grid(const std::string& text)
{
    const auto eq = text.find('=');
    if (eq == std::string::npos || eq == 0) {
        throw ValidationError("--param", "expected NAME=a..b[:step]");
    }
    ParamGrid g;
    g.name = text.substr(0, eq);
    const std::string range = text.substr(eq + 1);
    auto number = [&](const std::string& s) {
        return parse_assignment(g.name + "=" + s, "--param").second;
    };
    const auto dots = range.find("..");
    if (dots == std::string::npos) {
        g.values.push_back(number(range));
        return g;
    }
    const double lo = number(range.substr(0, dots));
    std::string rest = range.substr(dots + 2);
    double step = 1.0;
    if (const auto colon = rest.find(':'); colon != std::string::npos) {
        step = number(rest.substr(colon + 1));
        rest = rest.substr(0, colon);
    }
    const double hi = number(rest);
    if (!(step > 0.0) || hi < lo) {
        throw ValidationError("--param", "need a..b with a <= b and a positive step");
    }
    const auto count = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
    if (count > 100000) {
        throw ValidationError("--param", "grid too large");
    }
    for (std::size_t k = 0; k < count; ++k) {
        g.values.push_back(lo + static_cast<double>(k) * step);
    }
    return g;
}

std::vector<GoldenCheck> run_paper_checks(std::uint64_t seed)
{
    std::vector<GoldenCheck> checks;
    auto add = [&](std::string name, bool ok, double value, std::string expected) {
        checks.push_back({std::move(name), ok, value, std::move(expected)});
    };
    BargainOptions bopt;
    bopt.seed = seed;

    {
        const auto game = make_preset("paper-nbs-3user").to_game();
        AnalysisOptions aopt;
        aopt.bargain = bopt;
        const auto a = analyze(game, aopt);
        const double f_opt = link_total_input(game, a.optimum.profile, 1);
        const double f_nbs = link_total_input(game, a.outcome.profile, 1);
        const double exact = 15.0 * std::sqrt(2.0) - 10.0;
        add("paper-nbs-3user: optimal link-1 flow", std::abs(f_opt - exact) < 1e-8, f_opt, "15*sqrt(2) - 10");
        add("paper-nbs-3user: bargained link-1 flow", std::abs(f_nbs - 11.17) <= 0.05, f_nbs, "11.17 +- 0.05");
        add("paper-nbs-3user: bargaining is not socially optimal", f_nbs < f_opt, f_opt - f_nbs, "> 0");
        add("paper-nbs-3user: 1 < PoS < PoA", a.report.pos > 1.0 && a.report.pos < a.report.poa, a.report.pos,
            "between 1 and " + fmt12(a.report.poa));
    }
    {
        const double eps = 0.05;
        const auto game = make_preset("paper-hetero", {{"eps", eps}}).to_game();
        AnalysisOptions aopt;
        aopt.bargain = bopt;
        const auto a = analyze(game, aopt);
        const double off = link_total_input(game, a.nep.profile, 2);
        add("paper-hetero: equilibrium uses link 1 only", off == 0.0, off, "0");
        const double d = std::max(std::abs(a.nep_costs.per_user[0] - 0.5), std::abs(a.nep_costs.per_user[1] - 10.0));
        add("paper-hetero: equilibrium costs (0.5, 10)", d < 1e-9, d, "deviation < 1e-9");
        add("paper-hetero: bargaining coincides with the equilibrium",
            a.outcome.method == BargainMethod::CoincidesWithNEP, 0.0, "coincides-with-nep");
        add("paper-hetero: PoS = PoA >= 0.2/eps",
            std::abs(a.report.pos - a.report.poa) <= 1e-9 * a.report.poa && a.report.poa >= 0.2 / eps, a.report.poa,
            ">= " + fmt12(0.2 / eps));
        add("paper-hetero: user 2 perceived optimum = 1/eps",
            std::abs(a.perceived[1].objective - 1.0 / eps) < 1e-9 / eps, a.perceived[1].objective, fmt12(1.0 / eps));
    }
    {
        const double eps = 0.01;
        const double n = 50;
        const auto game = make_preset("paper-poa-growth", {{"N", n}, {"eps", eps}}).to_game();
        AnalysisOptions aopt;
        aopt.bargain = bopt;
        const auto a = analyze(game, aopt);
        const double bound = 0.25 / ((1 + eps) * (1 - n * std::pow(n + 1, -(n + 1) / n)));
        add("paper-poa-growth N=50: PoA above the lower bound", a.report.poa >= bound, a.report.poa,
            ">= " + fmt12(bound));
        double spread = 0.0;
        for (std::size_t l = 0; l < game.num_links(); ++l) {
            const double share = a.nep.profile.link_total(l) / n;
            for (std::size_t i = 0; i < game.num_users(); ++i) {
                spread = std::max(spread, std::abs(a.nep.profile(i, l) - share));
            }
        }
        add("paper-poa-growth N=50: equal equilibrium flows", spread < 1e-6, spread, "< 1e-6");
        add("paper-poa-growth N=50: PoS = 1", std::abs(a.report.pos - 1.0) <= 1e-6, a.report.pos, "1 +- 1e-6");
    }
    return checks;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Equilibrium, optimum and bargaining solver for routing games on parallel links",
                 "routebargain"};
    app.require_subcommand(1);
    Options o;
    std::string command;
    auto common = [&](CLI::App* sub) {
        sub->add_option("--scenario", o.scenario, "Scenario file (YAML or JSON)");
        sub->add_option("--preset", o.preset, "Built-in scenario name");
        sub->add_option("NAME", o.positional, "Built-in scenario name");
        sub->add_option("--set", o.sets, "Preset parameter, KEY=VALUE");
        sub->add_option("--tol", o.tol, "KKT tolerance");
        sub->add_option("--max-iters", o.max_iters, "Iteration limit for best-response sweeps");
        sub->add_option("--jobs", o.jobs, "Concurrent sweep points (default: hardware threads)");
        sub->add_option("--seed", o.seed, "Seed for bargaining multi-starts");
        sub->add_option("--out", o.out, "Write output to FILE instead of stdout");
        sub->add_option("--format", o.format, "record (JSON) or table (CSV)")
            ->check(CLI::IsMember({"record", "table"}));
        sub->callback([&command, sub] { command = sub->get_name(); });
    };
    common(app.add_subcommand("nep", "Nash equilibrium"));
    common(app.add_subcommand("opt", "Social optimum"));
    common(app.add_subcommand("nbs", "Nash bargaining solution"));
    common(app.add_subcommand("metrics", "PoA, PoS, PoI and PoH"));
    common(app.add_subcommand("paper-examples", "Check the reference examples"));
    auto* sweep = app.add_subcommand("sweep", "Metrics over a grid of one preset parameter");
    common(sweep);
    sweep->add_option("--param", o.param, "NAME=a..b[:step]")->required();
    app.add_subcommand("presets", "List built-in scenarios")->callback([&command] { command = "presets"; });

    std::vector<std::string> rev(args.rbegin(), args.rend());
    try {
        app.parse(rev);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return exit_ok;
    } catch (const CLI::ParseError& e) {
        err << e.what() << '\n';
        return exit_invalid;
    }

    std::ofstream file;
    std::ostream* sink = &out;
    if (!o.out.empty()) {
        file.open(o.out);
        if (!file) {
            err << "cannot open '" << o.out << "' for writing\n";
            return exit_invalid;
        }
        sink = &file;
    }

    try {
        if (command == "presets") {
            for (const auto& p : presets()) {
                *sink << p.name << "  " << p.description;
                for (const auto& [k, v] : p.defaults) {
                    *sink << "  " << k << "=" << fmt12(v);
                }
                *sink << '\n';
            }
            return exit_ok;
        }
        if (command == "sweep") {
            return command_sweep(o, *sink);
        }
        if (command == "paper-examples") {
            return command_paper_examples(o, *sink);
        }
        return command_solve(command, o, *sink);
    } catch (const NoConvergence& e) {
        err << "no convergence: " << e.what() << '\n';
        return exit_no_convergence;
    } catch (const ParseError& e) {
        err << "parse error: " << e.what() << '\n';
        return exit_invalid;
    } catch (const ValidationError& e) {
        err << "invalid input: " << e.what() << '\n';
        return exit_invalid;
    } catch (const Error& e) {
        err << "invalid input: " << e.what() << '\n';
        return exit_invalid;
    }
}

} // namespace routebargain::cli
