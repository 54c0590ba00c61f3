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
 * \file routebargain/metrics.hpp
 *
 * \brief Efficiency ratios between equilibrium, bargained and optimal costs.
 */

#ifndef ROUTEBARGAIN_METRICS_HPP
#define ROUTEBARGAIN_METRICS_HPP

#include <routebargain/bargaining.hpp>
#include <routebargain/errors.hpp>
#include <routebargain/game.hpp>
#include <routebargain/solvers.hpp>
#include <routebargain/water_filling.hpp>

#include <algorithm>
#include <cstddef>
#include <optional>
#include <utility>
#include <vector>

namespace routebargain {

struct PriceBounds
{
    /// R / r^i per user; +inf for zero-demand users.
    std::vector<double> poh_bound_per_user;
    std::optional<std::pair<double, double>> weighted_envelope;
};

struct PriceReport
{
    double poa = 1.0;
    double pos = 1.0;
    double poi = 1.0;
    std::vector<double> poh_per_user;
    double poh = 1.0;
    PriceBounds bounds;
    /// PoS under the weighted social cost, when weights were supplied.
    std::optional<double> weighted_pos;
    BargainMethod method = BargainMethod::Proportional;
    NbsCertainty nbs_certainty = NbsCertainty::MultiStartAgreement;
};

struct PohResult
{
    std::vector<double> per_user;
    double poh = 1.0;
};

struct BenchmarkResult
{
    std::vector<double> flows;
    /// Cost of `flows` played against the other users' equilibrium flows.
    double cost = 0.0;
    /// Restricted optimum values, one per restriction step, starting with J_sys^{i*}.
    std::vector<double> chain;
    /// Links kept by the final restriction.
    std::vector<std::size_t> links;
};

struct AnalysisOptions
{
    SolverOptions solver;
    BargainOptions bargain;
    std::optional<std::vector<double>> weights;
};

/// Every solve needed for a PriceReport, done once.
struct Analysis
{
    SolveReport nep;
    SolveReport optimum;
    CostVector nep_costs;
    double optimal_cost = 0.0;
    BargainOutcome outcome;
    std::vector<SolveReport> perceived;
    std::optional<SolveReport> weighted_optimum;
    PriceReport report;
};

namespace detail {

inline double ratio(double num, double den)
{
    if (den == 0.0) {
        return num == 0.0 ? 1.0 : infinity;
    }
    return num / den;
}

inline PohResult poh_from(const Game& game, const SolveReport& nep, const std::vector<SolveReport>& perceived)
{
    const double R = game.total_demand();
    const auto costs = evaluate_cost(game, nep.profile);
    PohResult out;
    out.per_user.resize(game.num_users());
    out.poh = 0.0;
    for (std::size_t i = 0; i < game.num_users(); ++i) {
        const double r = game.demand(i);
        // A user without demand pays its equilibrium multiplier per unit.
        const double unit = r > 0.0 ? costs.per_user[i] / r : nep.multipliers.at(i);
        const double reference = R > 0.0 ? perceived[i].objective / R : 0.0;
        out.per_user[i] = reference > 0.0 ? unit / reference : 1.0;
        out.poh = std::max(out.poh, out.per_user[i]);
    }
    return out;
}

} // namespace detail

/// (min alpha / max alpha, max alpha / min alpha).
inline std::pair<double, double> weighted_envelope(const Game& game, const std::vector<double>& weights)
{
    const auto w = detail::checked_weights(game, weights);
    const auto [lo, hi] = std::minmax_element(w.begin(), w.end());
    return {*lo / *hi, *hi / *lo};
}

/**
 * Feasible strategy for `user` against the other users' equilibrium flows
 * whose cost is at most J_sys^{i*}.
 *
 * Repeatedly optimizes the user's own cost for its demand plus the others'
 * flow on the links kept so far, dropping links where the others already send
 * more than that optimum, until the kept set stops shrinking.
 */
inline BenchmarkResult benchmark_strategy(const Game& game, std::size_t user, const SolveReport& nep,
                                          const SolverOptions& opt = {})
{
    if (user >= game.num_users()) {
        throw InvalidGame("benchmark_strategy: user index out of range");
    }
    const std::size_t L = game.num_links();
    std::vector<double> others(L, 0.0);
    for (std::size_t j = 0; j < game.num_users(); ++j) {
        if (j != user) {
            for (std::size_t l = 0; l < L; ++l) {
                others[l] += nep.profile(j, l);
            }
        }
    }
    const double slack = 1e-12 * std::max(1.0, game.total_demand());

    BenchmarkResult out;
    out.links.resize(L);
    for (std::size_t l = 0; l < L; ++l) {
        out.links[l] = l;
    }
    std::vector<double> optimum;
    for (std::size_t k = 0; k <= L; ++k) {
        std::vector<const CostModel*> models;
        double demand = game.demand(user);
        for (auto l : out.links) {
            models.push_back(&game.model(user, l));
            demand += others[l];
        }
        const auto rep = detail::single_commodity_optimum(models, demand, opt.tol_kkt);
        optimum.assign(rep.profile.row(0).begin(), rep.profile.row(0).end());
        if (!out.chain.empty() && rep.objective > out.chain.back() * (1.0 + 1e-9) + slack) {
            throw ConstructionFailed("benchmark_strategy: restricted optima increased");
        }
        out.chain.push_back(rep.objective);

        std::vector<std::size_t> kept;
        std::vector<double> kept_opt;
        for (std::size_t m = 0; m < out.links.size(); ++m) {
            if (others[out.links[m]] <= optimum[m] + slack) {
                kept.push_back(out.links[m]);
                kept_opt.push_back(optimum[m]);
            }
        }
        if (kept.size() == out.links.size()) {
            out.flows.assign(L, 0.0);
            double total = 0.0;
            for (std::size_t m = 0; m < kept.size(); ++m) {
                out.flows[kept[m]] = std::max(0.0, kept_opt[m] - others[kept[m]]);
                total += out.flows[kept[m]];
            }
            if (total > 0.0) {
                for (auto& x : out.flows) {
                    x *= game.demand(user) / total;
                }
            }
            out.cost = 0.0;
            for (std::size_t l = 0; l < L; ++l) {
                out.cost += game.model(user, l).value(out.flows[l], out.flows[l] + others[l]);
            }
            return out;
        }
        if (kept.empty()) {
            throw ConstructionFailed("benchmark_strategy: every link was dropped");
        }
        out.links = std::move(kept);
    }
    throw ConstructionFailed("benchmark_strategy: no fixed point within L restrictions");
}

/// Solves the equilibrium, optimum, bargaining outcome and perceived optima once and derives all ratios.
inline Analysis analyze(const Game& game, const AnalysisOptions& opt = {})
{
    Analysis a;
    a.nep = nash_equilibrium(game, opt.solver);
    a.optimum = social_optimum(game, std::nullopt, opt.solver);
    a.nep_costs = evaluate_cost(game, a.nep.profile);
    a.optimal_cost = evaluate_cost(game, a.optimum.profile).system;
    a.outcome = bargain(game, a.nep, a.optimum, opt.bargain);
    for (std::size_t i = 0; i < game.num_users(); ++i) {
        a.perceived.push_back(perceived_optimum(game, i, opt.solver));
    }

    auto& r = a.report;
    r.poa = detail::ratio(a.nep_costs.system, a.optimal_cost);
    r.pos = detail::ratio(a.outcome.costs.system, a.optimal_cost);
    r.poi = detail::ratio(a.nep_costs.system, a.outcome.costs.system);
    auto poh = detail::poh_from(game, a.nep, a.perceived);
    r.poh_per_user = std::move(poh.per_user);
    r.poh = poh.poh;
    const double R = game.total_demand();
    for (std::size_t i = 0; i < game.num_users(); ++i) {
        r.bounds.poh_bound_per_user.push_back(game.demand(i) > 0.0 ? R / game.demand(i) : infinity);
    }
    r.method = a.outcome.method;
    r.nbs_certainty = a.outcome.certainty;
    if (opt.weights) {
        r.bounds.weighted_envelope = weighted_envelope(game, *opt.weights);
        a.weighted_optimum = social_optimum(game, opt.weights, opt.solver);
        r.weighted_pos = detail::ratio(weighted_system_cost(a.outcome.costs, *opt.weights),
                                       a.weighted_optimum->objective);
    }
    return a;
}

inline double price_of_anarchy(const Game& game, const SolverOptions& opt = {})
{
    const auto nep = nash_equilibrium(game, opt);
    const auto optimum = social_optimum(game, std::nullopt, opt);
    return detail::ratio(evaluate_cost(game, nep.profile).system, evaluate_cost(game, optimum.profile).system);
}

inline double price_of_selfishness(const Game& game, const BargainOutcome& outcome, const SolverOptions& opt = {})
{
    const auto optimum = social_optimum(game, std::nullopt, opt);
    return detail::ratio(outcome.costs.system, evaluate_cost(game, optimum.profile).system);
}

inline double price_of_isolation(const Game&, const BargainOutcome& outcome)
{
    return detail::ratio(outcome.disagreement.system, outcome.costs.system);
}

/// Bargained weighted social cost over the weighted optimum.
inline double weighted_price_of_selfishness(const Game& game, const BargainOutcome& outcome,
                                            const std::vector<double>& weights, const SolverOptions& opt = {})
{
    const auto optimum = social_optimum(game, weights, opt);
    return detail::ratio(weighted_system_cost(outcome.costs, weights), optimum.objective);
}

inline PohResult price_of_heterogeneity(const Game& game, const SolverOptions& opt = {})
{
    const auto nep = nash_equilibrium(game, opt);
    std::vector<SolveReport> perceived;
    for (std::size_t i = 0; i < game.num_users(); ++i) {
        perceived.push_back(perceived_optimum(game, i, opt));
    }
    return detail::poh_from(game, nep, perceived);
}

} // namespace routebargain

#endif // ROUTEBARGAIN_METRICS_HPP
