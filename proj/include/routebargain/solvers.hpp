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
 * \file routebargain/solvers.hpp
 *
 * \brief Nash equilibrium, social optimum and perceived optimum of a game.
 *
 * The equilibrium is computed by round-robin best responses; each best
 * response is a water-filling on the user's marginal cost. The optimum of a
 * homogeneous game is a single water-filling on the aggregate marginal
 * (f T(f))'; weighted or heterogeneous optima use projected gradient descent
 * on the per-user simplices.
 */

#ifndef ROUTEBARGAIN_SOLVERS_HPP
#define ROUTEBARGAIN_SOLVERS_HPP

#include <routebargain/errors.hpp>
#include <routebargain/game.hpp>
#include <routebargain/water_filling.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace routebargain {

struct SolveReport
{
    StrategyProfile profile;
    /// One multiplier per user (equilibrium, heterogeneous optimum) or a single one.
    std::vector<double> multipliers;
    double kkt_residual = 0.0;
    std::size_t iterations = 0;
    bool converged = false;
    /// Objective at the returned profile (system cost, or perceived system cost).
    double objective = 0.0;
};

enum class InitialProfile
{
    /// Each user's demand spread in proportion to (residual) link capacities.
    Proportional,
    /// Users enter one at a time, each best-responding to those already placed.
    SequentialFill,
};

struct SolverOptions
{
    double tol_kkt = 1e-7;
    double tol_step = 1e-9;
    std::size_t max_iters = 10000;
    /// Flows below this are treated as zero once a solve has converged.
    double snap = 1e-12;
    /// Sweeps over which a non-decreasing residual switches damping on.
    std::size_t damping_window = 50;
    double damping = 0.5;
    InitialProfile initial = InitialProfile::Proportional;
    /// Overrides `initial` when set.
    std::optional<StrategyProfile> start;
};

struct BestResponse
{
    std::vector<double> flows;
    double multiplier = 0.0;
};

/// Cost-minimizing split of `user`'s demand against fixed per-link flows of the others.
inline BestResponse best_response(const Game& game, std::size_t user, std::span<const double> others_aggregate)
{
    const std::size_t L = game.num_links();
    if (others_aggregate.size() != L) {
        throw InvalidGame("others_aggregate must have one entry per link");
    }
    std::vector<ModelTerm> terms;
    terms.reserve(L);
    for (std::size_t l = 0; l < L; ++l) {
        if (others_aggregate[l] < 0.0) {
            throw InfeasibleProfile("negative aggregate flow");
        }
        terms.push_back({&game.model(user, l), others_aggregate[l]});
    }
    auto wf = water_fill(std::span<const ModelTerm>(terms), game.demand(user));
    return {std::move(wf.flows), wf.level};
}

namespace detail {

struct Residual
{
    double value = 0.0;
    double multiplier = 0.0;
};

/// Spread of `marginals` over positive-flow entries plus the shortfall of zero-flow entries.
inline Residual block_residual(std::span<const double> flows, std::span<const double> marginals, double snap)
{
    double min_pos = infinity, max_pos = -infinity, min_zero = infinity;
    for (std::size_t l = 0; l < flows.size(); ++l) {
        if (flows[l] > snap) {
            min_pos = std::min(min_pos, marginals[l]);
            max_pos = std::max(max_pos, marginals[l]);
        } else {
            min_zero = std::min(min_zero, marginals[l]);
        }
    }
    if (max_pos == -infinity) {
        return {0.0, min_zero};
    }
    if (!std::isfinite(max_pos)) {
        return {infinity, min_pos};
    }
    const double spread = max_pos - min_pos;
    const double shortfall = std::isfinite(min_zero) ? std::max(0.0, min_pos - min_zero) : 0.0;
    return {std::max(spread, shortfall), min_pos};
}

inline void snap_small_flows(const Game& game, StrategyProfile& p, double snap)
{
    for (std::size_t i = 0; i < p.num_users(); ++i) {
        auto row = p.row(i);
        double removed = 0.0;
        for (auto& x : row) {
            if (x < snap) {
                removed += x;
                x = 0.0;
            }
        }
        auto largest = std::max_element(row.begin(), row.end());
        *largest += removed;
        *largest += game.demand(i) - p.user_total(i);
    }
}

inline std::vector<double> capacity_shares(const Game& game)
{
    const std::size_t L = game.num_links();
    const double R = game.total_demand();
    std::vector<double> cap(L);
    double sum = 0.0;
    for (std::size_t l = 0; l < L; ++l) {
        double c = game.links()[l].capacity.value_or(infinity);
        for (std::size_t i = 0; i < game.num_users(); ++i) {
            c = std::min(c, game.model(i, l).capacity());
        }
        cap[l] = std::isfinite(c) ? c : std::max(R, 1.0);
        sum += cap[l];
    }
    for (auto& c : cap) {
        c /= sum;
    }
    return cap;
}

} // namespace detail

/// Every user's demand split in proportion to the links' (residual) capacities.
inline StrategyProfile proportional_start(const Game& game)
{
    const auto share = detail::capacity_shares(game);
    StrategyProfile p(game.num_users(), game.num_links());
    for (std::size_t i = 0; i < game.num_users(); ++i) {
        for (std::size_t l = 0; l < game.num_links(); ++l) {
            p(i, l) = game.demand(i) * share[l];
        }
    }
    return p;
}

/// Largest violation of the equilibrium KKT conditions, and each user's multiplier.
inline SolveReport nash_kkt(const Game& game, const StrategyProfile& profile, double snap = 1e-12)
{
    SolveReport rep;
    rep.profile = profile;
    const auto totals = profile.aggregate();
    std::vector<double> m(game.num_links());
    for (std::size_t i = 0; i < game.num_users(); ++i) {
        for (std::size_t l = 0; l < game.num_links(); ++l) {
            m[l] = game.model(i, l).marginal(profile(i, l), totals[l]);
        }
        const auto r = detail::block_residual(profile.row(i), m, snap);
        rep.kkt_residual = std::max(rep.kkt_residual, r.value);
        rep.multipliers.push_back(r.multiplier);
    }
    rep.objective = detail::costs_unchecked(game, profile).system;
    return rep;
}

inline SolveReport nash_equilibrium(const Game& game, const SolverOptions& opt = {})
{
    const std::size_t N = game.num_users();
    const std::size_t L = game.num_links();

    StrategyProfile p(N, L);
    std::vector<double> totals(L, 0.0);
    if (opt.start) {
        check_feasible(game, *opt.start);
        p = *opt.start;
        totals = p.aggregate();
    } else if (opt.initial == InitialProfile::Proportional) {
        p = proportional_start(game);
        totals = p.aggregate();
    } else {
        for (std::size_t i = 0; i < N; ++i) {
            auto br = best_response(game, i, totals);
            for (std::size_t l = 0; l < L; ++l) {
                p(i, l) = br.flows[l];
                totals[l] += br.flows[l];
            }
        }
    }

    std::vector<double> others(L);
    std::vector<double> history;
    bool damped = false;
    double residual = infinity;
    for (std::size_t sweep = 1; sweep <= opt.max_iters; ++sweep) {
        double change = 0.0;
        for (std::size_t i = 0; i < N; ++i) {
            for (std::size_t l = 0; l < L; ++l) {
                others[l] = std::max(0.0, totals[l] - p(i, l));
            }
            const auto br = best_response(game, i, others);
            for (std::size_t l = 0; l < L; ++l) {
                const double next = damped ? p(i, l) + opt.damping * (br.flows[l] - p(i, l)) : br.flows[l];
                change = std::max(change, std::abs(next - p(i, l)));
                p(i, l) = next;
            }
            for (std::size_t l = 0; l < L; ++l) {
                totals[l] = others[l] + p(i, l);
            }
        }
        totals = p.aggregate();
        residual = nash_kkt(game, p, opt.snap).kkt_residual;
        history.push_back(residual);
        if (change < opt.tol_step && residual < opt.tol_kkt) {
            detail::snap_small_flows(game, p, opt.snap);
            auto rep = nash_kkt(game, p, opt.snap);
            rep.iterations = sweep;
            rep.converged = rep.kkt_residual <= opt.tol_kkt;
            if (!rep.converged) {
                throw NoConvergence("nash_equilibrium: residual grew after snapping", sweep, rep.kkt_residual);
            }
            return rep;
        }
        if (!damped && history.size() > opt.damping_window
            && history.back() >= history[history.size() - 1 - opt.damping_window]) {
            damped = true;
        }
    }
    throw NoConvergence("nash_equilibrium did not converge", opt.max_iters, residual);
}

namespace detail {

inline std::vector<double> checked_weights(const Game& game, const std::vector<double>& w)
{
    if (w.size() != game.num_users()) {
        throw InvalidGame("social weights: one weight per user required");
    }
    double sum = 0.0;
    for (double a : w) {
        if (!(a > 0.0) || !std::isfinite(a)) {
            throw InvalidGame("social weights must be positive");
        }
        sum += a;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
        throw InvalidGame("social weights must sum to 1");
    }
    return w;
}

/// Single-commodity optimum of sum_l J_l(f_l, f_l) over the given links.
inline SolveReport single_commodity_optimum(std::span<const CostModel* const> models, double demand,
                                            double tol_kkt)
{
    const std::size_t L = models.size();
    std::vector<ModelTerm> terms;
    terms.reserve(L);
    for (auto* m : models) {
        terms.push_back({m, 0.0});
    }
    auto wf = water_fill(std::span<const ModelTerm>(terms), demand);

    SolveReport rep;
    rep.profile = StrategyProfile(1, L);
    std::vector<double> marg(L);
    for (std::size_t l = 0; l < L; ++l) {
        rep.profile(0, l) = wf.flows[l];
        marg[l] = models[l]->marginal(wf.flows[l], wf.flows[l]);
        rep.objective += models[l]->value(wf.flows[l], wf.flows[l]);
    }
    const auto r = block_residual(rep.profile.row(0), marg, 1e-12);
    rep.kkt_residual = r.value;
    rep.multipliers = {r.multiplier};
    rep.iterations = 1;
    rep.converged = rep.kkt_residual <= tol_kkt;
    return rep;
}

/// Gradient of sum_j alpha_j J^j with respect to every f_l^i.
inline void system_gradient(const Game& game, const StrategyProfile& p, std::span<const double> totals,
                            std::span<const double> alpha, StrategyProfile& grad)
{
    const std::size_t N = game.num_users();
    const std::size_t L = game.num_links();
    for (std::size_t l = 0; l < L; ++l) {
        double externality = 0.0;
        for (std::size_t j = 0; j < N; ++j) {
            externality += alpha[j] * game.model(j, l).total_partial(p(j, l), totals[l]);
        }
        for (std::size_t i = 0; i < N; ++i) {
            const auto& m = game.model(i, l);
            grad(i, l) = alpha[i] * m.weight() * m.latency(totals[l]) + externality;
        }
    }
}

inline double weighted_objective(const Game& game, const StrategyProfile& p, std::span<const double> alpha)
{
    const auto c = costs_unchecked(game, p);
    double s = 0.0;
    for (std::size_t i = 0; i < c.per_user.size(); ++i) {
        s += alpha[i] * c.per_user[i];
    }
    return s;
}

inline SolveReport descent_optimum(const Game& game, std::span<const double> alpha, const SolverOptions& opt)
{
    const std::size_t N = game.num_users();
    const std::size_t L = game.num_links();
    StrategyProfile p = opt.start ? *opt.start : proportional_start(game);
    StrategyProfile grad(N, L), trial(N, L);

    auto residual_of = [&](const StrategyProfile& x, const StrategyProfile& g, std::vector<double>* mult) {
        double res = 0.0;
        for (std::size_t i = 0; i < N; ++i) {
            const auto r = block_residual(x.row(i), g.row(i), opt.snap);
            res = std::max(res, r.value);
            if (mult) {
                mult->push_back(r.multiplier);
            }
        }
        return res;
    };

    double value = weighted_objective(game, p, alpha);
    double residual = infinity;
    std::size_t it = 0;
    for (; it < opt.max_iters; ++it) {
        const auto totals = p.aggregate();
        system_gradient(game, p, totals, alpha, grad);
        residual = residual_of(p, grad, nullptr);
        if (residual < opt.tol_kkt) {
            break;
        }
        bool accepted = false;
        for (double step = 1.0; step > 1e-30; step *= 0.5) {
            double slope = 0.0;
            for (std::size_t i = 0; i < N; ++i) {
                auto row = trial.row(i);
                for (std::size_t l = 0; l < L; ++l) {
                    row[l] = p(i, l) - step * grad(i, l);
                }
                project_to_simplex(row, game.demand(i));
                for (std::size_t l = 0; l < L; ++l) {
                    slope += grad(i, l) * (row[l] - p(i, l));
                }
            }
            const double next = weighted_objective(game, trial, alpha);
            if (std::isfinite(next) && next <= value + 1e-4 * slope) {
                p = trial;
                value = next;
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            break;
        }
    }
    snap_small_flows(game, p, opt.snap);
    const auto totals = p.aggregate();
    system_gradient(game, p, totals, alpha, grad);
    SolveReport rep;
    rep.profile = p;
    rep.kkt_residual = residual_of(p, grad, &rep.multipliers);
    rep.iterations = it;
    rep.converged = rep.kkt_residual <= opt.tol_kkt;
    rep.objective = weighted_objective(game, p, alpha);
    if (!rep.converged) {
        throw NoConvergence("social_optimum: projected descent stalled", it, rep.kkt_residual);
    }
    return rep;
}

} // namespace detail

/**
 * Minimizer of the (optionally weighted) social cost.
 *
 * Homogeneous games without weights are solved exactly on the aggregate and
 * split among users in proportion to their demands; the report then carries a
 * single multiplier.
 */
inline SolveReport social_optimum(const Game& game, const std::optional<std::vector<double>>& weights = std::nullopt,
                                  const SolverOptions& opt = {})
{
    std::vector<double> alpha(game.num_users(), 1.0);
    bool uniform = true;
    if (weights) {
        alpha = detail::checked_weights(game, *weights);
        uniform = std::all_of(alpha.begin(), alpha.end(), [&](double a) { return a == alpha.front(); });
    }
    if (game.is_homogeneous() && uniform) {
        std::vector<const CostModel*> models;
        for (std::size_t l = 0; l < game.num_links(); ++l) {
            models.push_back(&game.shared_model(l));
        }
        auto agg = detail::single_commodity_optimum(models, game.total_demand(), opt.tol_kkt);
        SolveReport rep = agg;
        rep.profile = StrategyProfile(game.num_users(), game.num_links());
        const double R = game.total_demand();
        for (std::size_t i = 0; i < game.num_users(); ++i) {
            for (std::size_t l = 0; l < game.num_links(); ++l) {
                rep.profile(i, l) = R > 0.0 ? game.demand(i) / R * agg.profile(0, l) : 0.0;
            }
        }
        rep.objective = alpha.front() * agg.objective;
        if (!rep.converged) {
            throw NoConvergence("social_optimum: aggregate water-filling inaccurate", 1, rep.kkt_residual);
        }
        return rep;
    }
    return detail::descent_optimum(game, alpha, opt);
}

/// Optimum of the whole traffic R routed under `user`'s own cost models (1 x L profile).
inline SolveReport perceived_optimum(const Game& game, std::size_t user, const SolverOptions& opt = {})
{
    std::vector<const CostModel*> models;
    for (std::size_t l = 0; l < game.num_links(); ++l) {
        models.push_back(&game.model(user, l));
    }
    auto rep = detail::single_commodity_optimum(models, game.total_demand(), opt.tol_kkt);
    if (!rep.converged) {
        throw NoConvergence("perceived_optimum: water-filling inaccurate", 1, rep.kkt_residual);
    }
    return rep;
}

} // namespace routebargain

#endif // ROUTEBARGAIN_SOLVERS_HPP
