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
 * \file routebargain/game.hpp
 *
 * \brief Parallel-links routing game: links, users, strategy profiles and costs.
 */

#ifndef ROUTEBARGAIN_GAME_HPP
#define ROUTEBARGAIN_GAME_HPP

#include <routebargain/cost_model.hpp>
#include <routebargain/errors.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace routebargain {

/// Absolute tolerance on demand constraints.
inline constexpr double tol_feas = 1e-9;

struct LinkSpec
{
    /// Physical capacity; absent for links whose cost forms carry none.
    std::optional<double> capacity;
    /// 1-based position of the link in the input description.
    std::size_t index = 0;
};

struct UserSpec
{
    double demand = 0.0;
    std::vector<CostModel> cost_models;
    /// 1-based position of the user in the input description.
    std::size_t index = 0;
};

enum class Homogeneity
{
    /// Shared M/M/1 latencies of residual capacity, unit weights.
    HomogeneousH5,
    /// Shared per-link models of any form, unit weights.
    HomogeneousH14,
    Standard,
};

inline const char* to_string(Homogeneity h) noexcept
{
    switch (h) {
    case Homogeneity::HomogeneousH5:
        return "homogeneous-h5";
    case Homogeneity::HomogeneousH14:
        return "homogeneous-h14";
    case Homogeneity::Standard:
        return "standard";
    }
    return "standard";
}

/**
 * Immutable game description.
 *
 * When every link has a capacity, links are stored by descending capacity
 * (stable); `links()[l].index` keeps the original position.
 */
class Game
{
public:
    Game(std::vector<LinkSpec> links, std::vector<UserSpec> users)
    {
        if (links.empty()) {
            throw InvalidGame("a game needs at least one link");
        }
        if (users.empty()) {
            throw InvalidGame("a game needs at least one user");
        }
        const std::size_t L = links.size();
        for (std::size_t l = 0; l < L; ++l) {
            if (links[l].index == 0) {
                links[l].index = l + 1;
            }
            if (links[l].capacity && (!(*links[l].capacity > 0.0) || !std::isfinite(*links[l].capacity))) {
                throw InvalidGame("link " + std::to_string(l + 1) + ": capacity must be positive");
            }
        }
        for (std::size_t i = 0; i < users.size(); ++i) {
            auto& u = users[i];
            if (u.index == 0) {
                u.index = i + 1;
            }
            if (!(u.demand >= 0.0) || !std::isfinite(u.demand)) {
                throw InvalidGame("user " + std::to_string(i + 1) + ": demand must be non-negative");
            }
            if (u.cost_models.size() != L) {
                throw InvalidGame("user " + std::to_string(i + 1) + ": expected " + std::to_string(L)
                                  + " cost models, got " + std::to_string(u.cost_models.size()));
            }
        }

        // A link whose users all see the same M/M/1 capacity inherits it.
        for (std::size_t l = 0; l < L; ++l) {
            if (links[l].capacity) {
                continue;
            }
            const double c = users.front().cost_models[l].capacity();
            const bool shared = std::isfinite(c)
                && std::all_of(users.begin(), users.end(),
                               [&](const UserSpec& u) { return u.cost_models[l].capacity() == c; });
            if (shared) {
                links[l].capacity = c;
            }
        }

        std::vector<std::size_t> order(L);
        std::iota(order.begin(), order.end(), std::size_t{0});
        const bool all_capacitated
            = std::all_of(links.begin(), links.end(), [](const LinkSpec& k) { return k.capacity.has_value(); });
        if (all_capacitated) {
            std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
                return *links[a].capacity > *links[b].capacity;
            });
        }
        links_.reserve(L);
        for (auto l : order) {
            links_.push_back(links[l]);
        }
        for (auto& u : users) {
            std::vector<CostModel> sorted;
            sorted.reserve(L);
            for (auto l : order) {
                sorted.push_back(u.cost_models[l]);
            }
            u.cost_models = std::move(sorted);
        }
        users_ = std::move(users);
        total_demand_ = 0.0;
        for (const auto& u : users_) {
            total_demand_ += u.demand;
        }
        homogeneity_ = classify();

        if (shared_mm1_everywhere()) {
            double cap = 0.0;
            for (const auto& k : links_) {
                cap += *k.capacity;
            }
            if (!(total_demand_ < cap)) {
                throw InvalidGame("total demand must be below the summed link capacity");
            }
        }
    }

    std::size_t num_users() const noexcept { return users_.size(); }
    std::size_t num_links() const noexcept { return links_.size(); }
    const std::vector<LinkSpec>& links() const noexcept { return links_; }
    const std::vector<UserSpec>& users() const noexcept { return users_; }
    const UserSpec& user(std::size_t i) const { return users_.at(i); }
    double demand(std::size_t i) const { return users_.at(i).demand; }
    double total_demand() const noexcept { return total_demand_; }
    const CostModel& model(std::size_t i, std::size_t l) const { return users_[i].cost_models[l]; }
    Homogeneity homogeneity() const noexcept { return homogeneity_; }
    bool is_homogeneous() const noexcept { return homogeneity_ != Homogeneity::Standard; }

    /// Per-link model shared by all users; only meaningful for homogeneous games.
    const CostModel& shared_model(std::size_t l) const { return users_.front().cost_models[l]; }

    std::vector<double> demands() const
    {
        std::vector<double> r;
        r.reserve(users_.size());
        for (const auto& u : users_) {
            r.push_back(u.demand);
        }
        return r;
    }

private:
    Homogeneity classify() const
    {
        const std::size_t L = links_.size();
        for (std::size_t l = 0; l < L; ++l) {
            const CostModel& ref = users_.front().cost_models[l];
            if (ref.weight() != 1.0) {
                return Homogeneity::Standard;
            }
            for (const auto& u : users_) {
                if (!(u.cost_models[l] == ref)) {
                    return Homogeneity::Standard;
                }
            }
        }
        for (std::size_t l = 0; l < L; ++l) {
            const CostModel& ref = users_.front().cost_models[l];
            if (!ref.is_mm1() || !links_[l].capacity || *links_[l].capacity != ref.capacity()) {
                return Homogeneity::HomogeneousH14;
            }
        }
        return Homogeneity::HomogeneousH5;
    }

    bool shared_mm1_everywhere() const
    {
        for (std::size_t l = 0; l < links_.size(); ++l) {
            if (!links_[l].capacity) {
                return false;
            }
            for (const auto& u : users_) {
                if (!u.cost_models[l].is_mm1() || u.cost_models[l].capacity() != *links_[l].capacity) {
                    return false;
                }
            }
        }
        return true;
    }

    std::vector<LinkSpec> links_;
    std::vector<UserSpec> users_;
    double total_demand_ = 0.0;
    Homogeneity homogeneity_ = Homogeneity::Standard;
};

/// Per-user per-link flows, row-major (user, link).
class StrategyProfile
{
public:
    StrategyProfile() = default;
    StrategyProfile(std::size_t users, std::size_t links)
        : users_(users), links_(links), flows_(users * links, 0.0)
    {
    }

    std::size_t num_users() const noexcept { return users_; }
    std::size_t num_links() const noexcept { return links_; }

    double& operator()(std::size_t i, std::size_t l) { return flows_[i * links_ + l]; }
    double operator()(std::size_t i, std::size_t l) const { return flows_[i * links_ + l]; }

    std::span<double> row(std::size_t i) { return {flows_.data() + i * links_, links_}; }
    std::span<const double> row(std::size_t i) const { return {flows_.data() + i * links_, links_}; }

    const std::vector<double>& data() const noexcept { return flows_; }

    double link_total(std::size_t l) const
    {
        double s = 0.0;
        for (std::size_t i = 0; i < users_; ++i) {
            s += (*this)(i, l);
        }
        return s;
    }

    std::vector<double> aggregate() const
    {
        std::vector<double> f(links_, 0.0);
        for (std::size_t i = 0; i < users_; ++i) {
            for (std::size_t l = 0; l < links_; ++l) {
                f[l] += (*this)(i, l);
            }
        }
        return f;
    }

    double user_total(std::size_t i) const
    {
        double s = 0.0;
        for (double x : row(i)) {
            s += x;
        }
        return s;
    }

    /// Largest absolute component-wise difference; +inf on shape mismatch.
    double max_abs_diff(const StrategyProfile& other) const
    {
        if (other.users_ != users_ || other.links_ != links_) {
            return infinity;
        }
        double d = 0.0;
        for (std::size_t k = 0; k < flows_.size(); ++k) {
            d = std::max(d, std::abs(flows_[k] - other.flows_[k]));
        }
        return d;
    }

    bool operator==(const StrategyProfile&) const = default;

private:
    std::size_t users_ = 0;
    std::size_t links_ = 0;
    std::vector<double> flows_;
};

struct CostVector
{
    std::vector<double> per_user;
    double system = 0.0;
};

/// Throws InfeasibleProfile unless the profile matches the game and meets its constraints.
inline void check_feasible(const Game& game, const StrategyProfile& profile, double tol = tol_feas)
{
    if (profile.num_users() != game.num_users() || profile.num_links() != game.num_links()) {
        throw InfeasibleProfile("profile shape does not match the game");
    }
    for (std::size_t i = 0; i < game.num_users(); ++i) {
        double sum = 0.0;
        for (std::size_t l = 0; l < game.num_links(); ++l) {
            const double x = profile(i, l);
            if (!std::isfinite(x) || x < -tol) {
                throw InfeasibleProfile("user " + std::to_string(i + 1) + " link " + std::to_string(l + 1)
                                        + ": negative or non-finite flow");
            }
            sum += x;
        }
        if (std::abs(sum - game.demand(i)) > tol) {
            throw InfeasibleProfile("user " + std::to_string(i + 1) + ": flows sum to "
                                    + std::to_string(sum) + " instead of its demand");
        }
    }
}

inline bool is_feasible(const Game& game, const StrategyProfile& profile, double tol = tol_feas)
{
    try {
        check_feasible(game, profile, tol);
    } catch (const InfeasibleProfile&) {
        return false;
    }
    return true;
}

namespace detail {

inline double user_cost(const Game& game, const StrategyProfile& p, std::span<const double> totals, std::size_t i)
{
    double c = 0.0;
    for (std::size_t l = 0; l < game.num_links(); ++l) {
        c += game.model(i, l).value(p(i, l), totals[l]);
    }
    return c;
}

/// Costs without the feasibility check; used inside solver loops.
inline CostVector costs_unchecked(const Game& game, const StrategyProfile& p)
{
    const auto totals = p.aggregate();
    CostVector out;
    out.per_user.resize(game.num_users());
    for (std::size_t i = 0; i < game.num_users(); ++i) {
        out.per_user[i] = user_cost(game, p, totals, i);
        out.system += out.per_user[i];
    }
    return out;
}

} // namespace detail

/// Per-user costs and their (unweighted) sum; +inf entries for saturated M/M/1 links.
inline CostVector evaluate_cost(const Game& game, const StrategyProfile& profile)
{
    check_feasible(game, profile);
    return detail::costs_unchecked(game, profile);
}

/// Sum of alpha_i * J^i.
inline double weighted_system_cost(const CostVector& costs, std::span<const double> weights)
{
    double s = 0.0;
    for (std::size_t i = 0; i < costs.per_user.size(); ++i) {
        s += weights[i] * costs.per_user[i];
    }
    return s;
}

/// Marginal cost of `user` on `link` at the given own and total flow.
inline double marginal_cost(const Game& game, std::size_t user, std::size_t link, double own_flow, double total_flow)
{
    if (user >= game.num_users() || link >= game.num_links()) {
        throw InvalidGame("user or link index out of range");
    }
    if (own_flow < 0.0 || total_flow < 0.0 || own_flow > total_flow) {
        throw DomainError("marginal_cost requires 0 <= own_flow <= total_flow");
    }
    const CostModel& m = game.model(user, link);
    if (!(total_flow < m.capacity())) {
        throw DomainError("total flow reaches the M/M/1 capacity");
    }
    return m.marginal(own_flow, total_flow);
}

} // namespace routebargain

#endif // ROUTEBARGAIN_GAME_HPP
