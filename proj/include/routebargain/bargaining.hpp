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
 * \file routebargain/bargaining.hpp
 *
 * \brief Bargained strategy profiles with the equilibrium as disagreement point.
 *
 * Only pure profiles are bargained over: an agreement is a single feasible
 * strategy profile, not a lottery over several.
 */

#ifndef ROUTEBARGAIN_BARGAINING_HPP
#define ROUTEBARGAIN_BARGAINING_HPP

#include <routebargain/errors.hpp>
#include <routebargain/game.hpp>
#include <routebargain/solvers.hpp>
#include <routebargain/water_filling.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace routebargain {

enum class BargainMethod
{
    Proportional,
    FlowExchange,
    TwoUserClosedForm,
    IdenticalUsers,
    NashProductAscent,
    CoincidesWithNEP,
};

inline const char* to_string(BargainMethod m) noexcept
{
    switch (m) {
    case BargainMethod::Proportional:
        return "proportional";
    case BargainMethod::FlowExchange:
        return "flow-exchange";
    case BargainMethod::TwoUserClosedForm:
        return "two-user-closed-form";
    case BargainMethod::IdenticalUsers:
        return "identical-users";
    case BargainMethod::NashProductAscent:
        return "nash-product-ascent";
    case BargainMethod::CoincidesWithNEP:
        return "coincides-with-nep";
    }
    return "proportional";
}

enum class NbsCertainty
{
    MultiStartAgreement,
    SingleRun,
};

inline const char* to_string(NbsCertainty c) noexcept
{
    return c == NbsCertainty::MultiStartAgreement ? "multi-start-agreement" : "single-run";
}

struct BargainOutcome
{
    StrategyProfile profile;
    CostVector costs;
    CostVector disagreement;
    double nash_product = 0.0;
    BargainMethod method = BargainMethod::Proportional;
    /// Flow exchanges performed (flow_exchange only).
    std::size_t exchange_events = 0;
    /// Gain floor enforced by flow_exchange.
    double epsilon = 0.0;
    /// Ascent iterations summed over all starts (nbs_general only).
    std::size_t iterations = 0;
    bool converged = true;
    NbsCertainty certainty = NbsCertainty::MultiStartAgreement;
};

/// Product of the gains over the disagreement point, 0 if any gain is negative.
inline double nash_product(const CostVector& costs, const CostVector& disagreement)
{
    double p = 1.0;
    for (std::size_t i = 0; i < costs.per_user.size(); ++i) {
        const double g = disagreement.per_user[i] - costs.per_user[i];
        if (!(g >= 0.0)) {
            return 0.0;
        }
        p *= g;
    }
    return p;
}

class BargainNoConvergence : public NoConvergence
{
public:
    BargainNoConvergence(BargainOutcome best, std::size_t iterations, double residual)
        : NoConvergence("nbs_general did not reach a stationary point", iterations, residual),
          best_(std::move(best))
    {
    }

    const BargainOutcome& best() const noexcept { return best_; }

private:
    BargainOutcome best_;
};

namespace detail {

inline BargainOutcome make_outcome(const Game& game, StrategyProfile profile, const CostVector& disagreement,
                                   BargainMethod method)
{
    BargainOutcome out;
    out.costs = evaluate_cost(game, profile);
    out.profile = std::move(profile);
    out.disagreement = disagreement;
    out.nash_product = nash_product(out.costs, disagreement);
    out.method = method;
    return out;
}

inline void require_homogeneous(const Game& game, const char* who)
{
    if (!game.is_homogeneous()) {
        throw NotHomogeneous(std::string(who) + " requires users with shared per-link cost models");
    }
}

inline std::vector<double> optimum_prices(const Game& game, std::span<const double> aggregate)
{
    std::vector<double> price(game.num_links());
    for (std::size_t l = 0; l < game.num_links(); ++l) {
        price[l] = game.shared_model(l).latency(aggregate[l]);
    }
    return price;
}

/// Link indices by ascending price, ties kept in link order.
inline std::vector<std::size_t> price_order(std::span<const double> price)
{
    std::vector<std::size_t> ord(price.size());
    std::iota(ord.begin(), ord.end(), std::size_t{0});
    std::stable_sort(ord.begin(), ord.end(), [&](std::size_t a, std::size_t b) { return price[a] < price[b]; });
    return ord;
}

} // namespace detail

/// f_l^i = (r^i / R) * aggregate[l].
inline StrategyProfile proportional_profile(const Game& game, std::span<const double> aggregate)
{
    if (aggregate.size() != game.num_links()) {
        throw InfeasibleProfile("aggregate must have one entry per link");
    }
    const double R = game.total_demand();
    double sum = 0.0;
    for (double f : aggregate) {
        if (f < 0.0) {
            throw InfeasibleProfile("aggregate flows must be non-negative");
        }
        sum += f;
    }
    if (std::abs(sum - R) > tol_feas * std::max(1.0, R)) {
        throw InfeasibleProfile("aggregate flows do not add up to the total demand");
    }
    StrategyProfile p(game.num_users(), game.num_links());
    for (std::size_t i = 0; i < game.num_users(); ++i) {
        for (std::size_t l = 0; l < game.num_links(); ++l) {
            p(i, l) = R > 0.0 ? game.demand(i) / R * aggregate[l] : 0.0;
        }
    }
    return p;
}

namespace detail {

struct ExchangeResult
{
    StrategyProfile profile;
    std::size_t events = 0;
    bool ok = false;
    std::size_t stuck_user = 0;
};

inline ExchangeResult run_exchange(const Game& game, const CostVector& nep, std::span<const double> aggregate,
                                   std::span<const double> price, double eps, double tol)
{
    const std::size_t N = game.num_users();
    const std::size_t L = game.num_links();
    ExchangeResult res;
    res.profile = proportional_profile(game, aggregate);
    auto& p = res.profile;
    std::vector<double> gain(N);
    for (std::size_t i = 0; i < N; ++i) {
        double c = 0.0;
        for (std::size_t l = 0; l < L; ++l) {
            c += p(i, l) * price[l];
        }
        gain[i] = nep.per_user[i] - c;
    }
    auto needy = [&](std::size_t i) { return gain[i] < eps - tol; };
    auto donor = [&](std::size_t i) { return gain[i] > eps + tol; };

    const auto ord = price_order(price);
    std::size_t lo = 0;
    std::size_t hi = L - 1;
    const std::size_t event_cap = 8 * N * L + 8 * N;
    while (lo < hi && res.events <= event_cap) {
        const std::size_t cheap = ord[lo];
        const std::size_t dear = ord[hi];
        std::size_t k = N, m = N;
        for (std::size_t i = 0; i < N && k == N; ++i) {
            if (donor(i) && p(i, cheap) > 0.0) {
                k = i;
            }
        }
        if (k == N) {
            ++lo;
            continue;
        }
        for (std::size_t i = 0; i < N && m == N; ++i) {
            if (needy(i) && p(i, dear) > 0.0) {
                m = i;
            }
        }
        if (m == N) {
            --hi;
            continue;
        }
        const double rate = price[dear] - price[cheap];
        if (!(rate > 0.0)) {
            break;
        }
        const double by_donor_flow = p(k, cheap);
        const double by_needy_flow = p(m, dear);
        const double by_donor_gain = (gain[k] - eps) / rate;
        const double by_needy_gain = (eps - gain[m]) / rate;
        const double delta = std::min({by_donor_flow, by_needy_flow, by_donor_gain, by_needy_gain});

        p(m, dear) -= delta;
        p(m, cheap) += delta;
        p(k, cheap) -= delta;
        p(k, dear) += delta;
        gain[m] += delta * rate;
        gain[k] -= delta * rate;
        if (delta == by_donor_flow) {
            p(k, cheap) = 0.0;
        }
        if (delta == by_needy_flow) {
            p(m, dear) = 0.0;
        }
        if (delta == by_donor_gain) {
            gain[k] = eps;
        }
        if (delta == by_needy_gain) {
            gain[m] = eps;
        }
        ++res.events;
    }
    res.ok = true;
    for (std::size_t i = 0; i < N; ++i) {
        if (needy(i)) {
            res.ok = false;
            res.stuck_user = i;
            break;
        }
    }
    return res;
}

} // namespace detail

/**
 * Socially optimal profile in which every user gains at least `epsilon` over
 * the equilibrium.
 *
 * Starts from the proportional split of the optimum and lets users with too
 * little gain swap flow with users that have gain to spare: the needy user
 * moves flow from an expensive link to a cheap one, the donor the other way,
 * so link totals never change. Gain moves at the price gap of the two links.
 * Without an explicit epsilon the floor starts at half the equilibrium
 * surplus shared equally and is halved until every user can reach it.
 */
inline BargainOutcome flow_exchange(const Game& game, const CostVector& nep, const SolveReport& optimum,
                                    std::optional<double> epsilon = std::nullopt)
{
    detail::require_homogeneous(game, "flow_exchange");
    const std::size_t N = game.num_users();
    const auto aggregate = optimum.profile.aggregate();
    const auto price = detail::optimum_prices(game, aggregate);

    double optimal_cost = 0.0;
    for (std::size_t l = 0; l < game.num_links(); ++l) {
        optimal_cost += aggregate[l] * price[l];
    }
    const double surplus = nep.system - optimal_cost;
    const double tol = 1e-12 * std::max(1.0, nep.system);
    if (surplus <= tol) {
        return detail::make_outcome(game, proportional_profile(game, aggregate), nep, BargainMethod::FlowExchange);
    }

    double eps = epsilon.value_or(surplus / (2.0 * static_cast<double>(N)));
    const int attempts = epsilon ? 1 : 40;
    detail::ExchangeResult res;
    for (int a = 0; a < attempts; ++a, eps *= 0.5) {
        res = detail::run_exchange(game, nep, aggregate, price, eps, tol);
        if (res.ok) {
            break;
        }
    }
    if (!res.ok) {
        throw NotEssentialHere("flow exchange could not lift user " + std::to_string(res.stuck_user + 1)
                               + " above the gain floor");
    }
    auto out = detail::make_outcome(game, std::move(res.profile), nep, BargainMethod::FlowExchange);
    out.exchange_events = res.events;
    out.epsilon = eps;
    return out;
}

/**
 * Socially optimal two-user profile in which user 0 pays `target_cost`.
 *
 * User 0's cost on the optimal link totals is affine along the segment
 * between its cheapest-first and dearest-first fillings, so the split is
 * found in closed form on that segment.
 */
inline StrategyProfile two_user_split(const Game& game, const SolveReport& optimum, double target_cost)
{
    if (game.num_users() != 2) {
        throw WrongArity("two_user_split needs exactly two users");
    }
    detail::require_homogeneous(game, "two_user_split");
    const std::size_t L = game.num_links();
    const auto aggregate = optimum.profile.aggregate();
    const auto price = detail::optimum_prices(game, aggregate);
    const auto ord = detail::price_order(price);

    auto fill = [&](bool cheapest_first) {
        std::vector<double> x(L, 0.0);
        double left = game.demand(0);
        for (std::size_t k = 0; k < L && left > 0.0; ++k) {
            const std::size_t l = cheapest_first ? ord[k] : ord[L - 1 - k];
            x[l] = std::min(left, aggregate[l]);
            left -= x[l];
        }
        return x;
    };
    auto cost = [&](const std::vector<double>& x) {
        double c = 0.0;
        for (std::size_t l = 0; l < L; ++l) {
            c += x[l] * price[l];
        }
        return c;
    };
    const auto low = fill(true);
    const auto high = fill(false);
    const double c_low = cost(low);
    const double c_high = cost(high);
    const double slack = 1e-9 * std::max(1.0, std::abs(c_high));
    if (target_cost < c_low - slack || target_cost > c_high + slack) {
        throw ConstructionFailed("target cost lies outside the socially optimal range");
    }
    const double theta = c_high > c_low ? std::clamp((target_cost - c_low) / (c_high - c_low), 0.0, 1.0) : 0.0;
    StrategyProfile p(2, L);
    for (std::size_t l = 0; l < L; ++l) {
        p(0, l) = low[l] + theta * (high[l] - low[l]);
        p(1, l) = std::max(0.0, aggregate[l] - p(0, l));
    }
    return p;
}

/// Costs ((J* + J^1 - J^2) / 2, (J* + J^2 - J^1) / 2): both users gain the same.
inline std::pair<double, double> two_user_bargained_costs(std::span<const double> nep_costs, double optimal_cost)
{
    return {0.5 * (optimal_cost + nep_costs[0] - nep_costs[1]), 0.5 * (optimal_cost + nep_costs[1] - nep_costs[0])};
}

/// Equal-gain split of the optimal system cost between two homogeneous users.
inline BargainOutcome nbs_two_user(const Game& game, const SolveReport& nep, const SolveReport& optimum)
{
    if (game.num_users() != 2) {
        throw WrongArity("nbs_two_user needs exactly two users");
    }
    detail::require_homogeneous(game, "nbs_two_user");
    const auto disagreement = evaluate_cost(game, nep.profile);
    const double optimal = evaluate_cost(game, optimum.profile).system;
    const double target = two_user_bargained_costs(disagreement.per_user, optimal).first;
    return detail::make_outcome(game, two_user_split(game, optimum, target), disagreement,
                                BargainMethod::TwoUserClosedForm);
}

inline BargainOutcome nbs_two_user(const Game& game, const SolverOptions& opt = {})
{
    if (game.num_users() != 2) {
        throw WrongArity("nbs_two_user needs exactly two users");
    }
    return nbs_two_user(game, nash_equilibrium(game, opt), social_optimum(game, std::nullopt, opt));
}

/// Users with equal demands share the optimum proportionally, each paying J*_sys / N.
inline BargainOutcome nbs_identical(const Game& game, const SolveReport& nep, const SolveReport& optimum)
{
    detail::require_homogeneous(game, "nbs_identical");
    const double r0 = game.demand(0);
    for (std::size_t i = 1; i < game.num_users(); ++i) {
        if (std::abs(game.demand(i) - r0) > 1e-12 * r0) {
            throw NotIdentical("nbs_identical needs equal demands");
        }
    }
    const auto disagreement = evaluate_cost(game, nep.profile);
    return detail::make_outcome(game, proportional_profile(game, optimum.profile.aggregate()), disagreement,
                                BargainMethod::IdenticalUsers);
}

inline BargainOutcome nbs_identical(const Game& game, const SolverOptions& opt = {})
{
    detail::require_homogeneous(game, "nbs_identical");
    return nbs_identical(game, nash_equilibrium(game, opt), social_optimum(game, std::nullopt, opt));
}

struct BargainOptions
{
    std::size_t max_iters = 50000;
    /// Stationarity threshold on the scaled projected gradient.
    double tol_grad = 1e-8;
    /// Looser threshold accepted once no step improves the objective in floating point.
    double tol_stall = 1e-6;
    /// Ascent runs: the given start plus seeded perturbations of it.
    std::size_t starts = 5;
    std::uint64_t seed = 0;
    double perturbation = 0.05;
    /// Relative cost agreement required to call the multi-start result certain.
    double agreement_tol = 1e-6;
    /// Gain floor for the flow-exchange start; half the surplus per user when unset.
    std::optional<double> exchange_epsilon;
};

namespace detail {

struct AscentState
{
    StrategyProfile profile;
    std::vector<double> gains;
    double log_product = -infinity;
    double residual = infinity;
    std::size_t iterations = 0;
    bool stalled = false;
};

inline std::vector<double> gains_of(const Game& game, const StrategyProfile& p, const CostVector& d)
{
    const auto c = costs_unchecked(game, p);
    std::vector<double> g(c.per_user.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        g[i] = d.per_user[i] - c.per_user[i];
    }
    return g;
}

inline double log_product(std::span<const double> gains)
{
    double s = 0.0;
    for (double g : gains) {
        if (!(g > 0.0) || !std::isfinite(g)) {
            return -infinity;
        }
        s += std::log(g);
    }
    return s;
}

/// Smooth lower bound on min_i gains; exact as tau -> 0.
inline double soft_min(std::span<const double> gains, double tau)
{
    double lo = infinity;
    for (double g : gains) {
        if (!std::isfinite(g)) {
            return -infinity;
        }
        lo = std::min(lo, g);
    }
    double s = 0.0;
    for (double g : gains) {
        s += std::exp(-(g - lo) / tau);
    }
    return lo - tau * std::log(s);
}

inline double scaled_residual(const Game& game, const StrategyProfile& p, const StrategyProfile& grad)
{
    double res = 0.0;
    double scale = 0.0;
    for (std::size_t i = 0; i < game.num_users(); ++i) {
        res = std::max(res, block_residual(p.row(i), grad.row(i), 1e-12).value);
        for (double g : grad.row(i)) {
            scale = std::max(scale, std::abs(g));
        }
    }
    return scale > 0.0 ? res / scale : 0.0;
}

/**
 * Projected ascent of an objective of the gains whose gradient with respect
 * to the costs is -weights(gains). `value` must return -inf outside its domain.
 */
/**
 * Newton direction for -sum_j log G_j restricted to the positive flows, with
 * each user's flow total held fixed. Empty when no direction exists.
 */
inline std::optional<StrategyProfile> log_product_newton(const Game& game, const StrategyProfile& p,
                                                         std::span<const double> gains, const StrategyProfile& grad)
{
    const std::size_t N = game.num_users();
    const std::size_t L = game.num_links();
    const auto totals = p.aggregate();

    struct Var
    {
        std::size_t user, link;
    };
    std::vector<Var> vars;
    std::vector<std::size_t> first(N + 1, 0);
    for (std::size_t i = 0; i < N; ++i) {
        first[i] = vars.size();
        for (std::size_t l = 0; l < L; ++l) {
            if (p(i, l) > 1e-14 * std::max(1.0, game.demand(i))) {
                vars.push_back({i, l});
            }
        }
    }
    first[N] = vars.size();
    const auto n = static_cast<Eigen::Index>(vars.size());
    const Eigen::Index m = n - static_cast<Eigen::Index>(N);
    if (m <= 0) {
        return std::nullopt;
    }

    // dJ[j][a] = dJ_j / dF_a.
    Eigen::MatrixXd dJ = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(N), n);
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(n, n);
    Eigen::VectorXd g(n);
    for (Eigen::Index a = 0; a < n; ++a) {
        const auto [i, l] = vars[static_cast<std::size_t>(a)];
        g(a) = grad(i, l);
        for (std::size_t j = 0; j < N; ++j) {
            const auto& mdl = game.model(j, l);
            const double x = p(j, l);
            double d = x > 0.0 ? mdl.weight() * x * mdl.latency_slope(totals[l]) : 0.0;
            if (j == i) {
                d += mdl.weight() * mdl.latency(totals[l]);
            }
            dJ(static_cast<Eigen::Index>(j), a) = d;
        }
    }
    for (Eigen::Index a = 0; a < n; ++a) {
        const auto [i, l] = vars[static_cast<std::size_t>(a)];
        for (Eigen::Index b = a; b < n; ++b) {
            const auto [k, mm] = vars[static_cast<std::size_t>(b)];
            double h = 0.0;
            for (std::size_t j = 0; j < N; ++j) {
                const auto J = static_cast<Eigen::Index>(j);
                h += dJ(J, a) * dJ(J, b) / (gains[j] * gains[j]);
            }
            if (l == mm) {
                for (std::size_t j = 0; j < N; ++j) {
                    const auto& mdl = game.model(j, l);
                    const double x = p(j, l);
                    const double own = static_cast<double>((j == i) + (j == k));
                    double c = own * mdl.latency_slope(totals[l]);
                    if (x > 0.0) {
                        c += x * mdl.latency_curvature(totals[l]);
                    }
                    h += mdl.weight() * c / gains[j];
                }
            }
            H(a, b) = h;
            H(b, a) = h;
        }
    }
    if (!H.allFinite()) {
        return std::nullopt;
    }

    // Basis of directions keeping every user's total: e_a - e_last within each user.
    Eigen::MatrixXd Z = Eigen::MatrixXd::Zero(n, m);
    Eigen::Index col = 0;
    for (std::size_t i = 0; i < N; ++i) {
        const auto lo = static_cast<Eigen::Index>(first[i]);
        const auto hi = static_cast<Eigen::Index>(first[i + 1]);
        for (Eigen::Index a = lo; a + 1 < hi; ++a) {
            Z(a, col) = 1.0;
            Z(hi - 1, col) = -1.0;
            ++col;
        }
    }
    const Eigen::MatrixXd Hr = Z.transpose() * H * Z;
    const Eigen::VectorXd gr = Z.transpose() * g;
    const double scale = std::max(1e-300, Hr.diagonal().cwiseAbs().maxCoeff());
    double mu = 0.0;
    for (int attempt = 0; attempt < 60; ++attempt) {
        Eigen::LLT<Eigen::MatrixXd> llt(Hr + mu * Eigen::MatrixXd::Identity(m, m));
        if (llt.info() == Eigen::Success) {
            const Eigen::VectorXd d = Z * llt.solve(-gr);
            if (!d.allFinite()) {
                return std::nullopt;
            }
            StrategyProfile dir(N, L);
            for (Eigen::Index a = 0; a < n; ++a) {
                const auto [i, l] = vars[static_cast<std::size_t>(a)];
                dir(i, l) = d(a);
            }
            return dir;
        }
        mu = mu == 0.0 ? 1e-10 * scale : mu * 4.0;
    }
    return std::nullopt;
}

struct NoNewton
{
    std::optional<StrategyProfile> operator()(const Game&, const StrategyProfile&, std::span<const double>,
                                              const StrategyProfile&) const
    {
        return std::nullopt;
    }
};

template <class Value, class Weights, class Stop, class Newton = NoNewton>
void projected_ascent(const Game& game, const CostVector& disagreement, AscentState& st, Value value, Weights weights,
                      Stop stop, std::size_t max_iters, double tol_grad, double first_step, Newton newton = {})
{
    const std::size_t N = game.num_users();
    const std::size_t L = game.num_links();
    StrategyProfile grad(N, L), trial(N, L);
    double step = first_step;
    double current = value(st.gains);
    st.stalled = false;
    for (std::size_t it = 0; it < max_iters; ++it) {
        if (stop(st.gains)) {
            break;
        }
        const auto alpha = weights(st.gains);
        const auto totals = st.profile.aggregate();
        system_gradient(game, st.profile, totals, alpha, grad);
        st.residual = scaled_residual(game, st.profile, grad);
        if (st.residual < tol_grad) {
            break;
        }
        if (auto dir = newton(game, st.profile, st.gains, grad)) {
            bool took = false;
            for (double t = 1.0; t > 1e-12 && !took; t *= 0.5) {
                double slope = 0.0;
                for (std::size_t i = 0; i < N; ++i) {
                    auto row = trial.row(i);
                    for (std::size_t l = 0; l < L; ++l) {
                        row[l] = st.profile(i, l) + t * (*dir)(i, l);
                    }
                    project_to_simplex(row, game.demand(i));
                    for (std::size_t l = 0; l < L; ++l) {
                        slope += grad(i, l) * (row[l] - st.profile(i, l));
                    }
                }
                if (!(slope < 0.0)) {
                    continue;
                }
                auto g = gains_of(game, trial, disagreement);
                const double next = value(g);
                if (next > current && next >= current - 1e-4 * slope) {
                    st.profile = trial;
                    st.gains = std::move(g);
                    current = next;
                    took = true;
                }
            }
            if (took) {
                ++st.iterations;
                continue;
            }
        }
        bool accepted = false;
        for (int halvings = 0; halvings < 80; ++halvings, step *= 0.5) {
            double slope = 0.0;
            for (std::size_t i = 0; i < N; ++i) {
                auto row = trial.row(i);
                for (std::size_t l = 0; l < L; ++l) {
                    row[l] = st.profile(i, l) - step * grad(i, l);
                }
                project_to_simplex(row, game.demand(i));
                for (std::size_t l = 0; l < L; ++l) {
                    slope += grad(i, l) * (row[l] - st.profile(i, l));
                }
            }
            if (!(slope < 0.0)) {
                continue;
            }
            auto g = gains_of(game, trial, disagreement);
            const double next = value(g);
            if (next >= current - 1e-4 * slope) {
                st.profile = trial;
                st.gains = std::move(g);
                current = next;
                accepted = true;
                break;
            }
        }
        ++st.iterations;
        if (!accepted) {
            st.stalled = true;
            break;
        }
        step *= 2.0;
    }
    const auto alpha = weights(st.gains);
    const auto totals = st.profile.aggregate();
    system_gradient(game, st.profile, totals, alpha, grad);
    st.residual = scaled_residual(game, st.profile, grad);
}

inline void ascend_nash_product(const Game& game, const CostVector& disagreement, AscentState& st,
                                const BargainOptions& opt)
{
    auto value = [](std::span<const double> g) { return log_product(g); };
    auto weights = [](std::span<const double> g) {
        std::vector<double> a(g.size());
        for (std::size_t i = 0; i < g.size(); ++i) {
            a[i] = 1.0 / g[i];
        }
        return a;
    };
    auto never = [](std::span<const double>) { return false; };
    const double min_gain = *std::min_element(st.gains.begin(), st.gains.end());
    projected_ascent(game, disagreement, st, value, weights, never, opt.max_iters, opt.tol_grad, 0.1 * min_gain,
                     [](const Game& g, const StrategyProfile& p, std::span<const double> gains,
                        const StrategyProfile& grad) { return log_product_newton(g, p, gains, grad); });
    st.log_product = log_product(st.gains);
}

/// Search for a profile in which every gain is strictly positive.
inline bool find_interior_start(const Game& game, const CostVector& disagreement, AscentState& st,
                                const BargainOptions& opt)
{
    const double scale = std::max(1e-300, disagreement.system / static_cast<double>(game.num_users()));
    const double positive = 1e-9 * scale;
    auto ok = [&](std::span<const double> g) { return *std::min_element(g.begin(), g.end()) > positive; };
    for (double tau = 1e-2 * scale; tau >= 1e-10 * scale && !ok(st.gains); tau *= 0.1) {
        auto value = [tau](std::span<const double> g) { return soft_min(g, tau); };
        auto weights = [tau](std::span<const double> g) {
            const double lo = *std::min_element(g.begin(), g.end());
            std::vector<double> a(g.size());
            double s = 0.0;
            for (std::size_t i = 0; i < g.size(); ++i) {
                a[i] = std::exp(-(g[i] - lo) / tau);
                s += a[i];
            }
            for (auto& v : a) {
                v /= s;
            }
            return a;
        };
        projected_ascent(game, disagreement, st, value, weights, ok, opt.max_iters / 10, opt.tol_grad, 1e-2 * scale);
    }
    return ok(st.gains);
}

inline bool lexicographically_less(const StrategyProfile& a, const StrategyProfile& b)
{
    return std::lexicographical_compare(a.data().begin(), a.data().end(), b.data().begin(), b.data().end());
}

} // namespace detail

/**
 * Nash bargaining over pure profiles: locally maximizes sum_i log(J^_i - J_i(f))
 * by projected gradient ascent from `start` and seeded perturbations of it.
 *
 * If `start` has a non-positive gain, a soft-min ascent first looks for a
 * profile that improves on the equilibrium for everyone; when none is found
 * the outcome is the equilibrium itself (CoincidesWithNEP).
 */
inline BargainOutcome nbs_general(const Game& game, const SolveReport& nep, const StrategyProfile& start,
                                  const BargainOptions& opt = {})
{
    check_feasible(game, start);
    const auto disagreement = evaluate_cost(game, nep.profile);

    detail::AscentState base;
    base.profile = start;
    base.gains = detail::gains_of(game, start, disagreement);
    if (!std::isfinite(detail::log_product(base.gains))) {
        if (!detail::find_interior_start(game, disagreement, base, opt)) {
            auto out = detail::make_outcome(game, nep.profile, disagreement, BargainMethod::CoincidesWithNEP);
            out.iterations = base.iterations;
            return out;
        }
    }
    const double start_value = detail::log_product(base.gains);

    std::mt19937_64 rng(opt.seed);
    std::vector<detail::AscentState> runs;
    runs.push_back(base);
    for (std::size_t s = 1; s < opt.starts; ++s) {
        StrategyProfile q(game.num_users(), game.num_links());
        for (std::size_t i = 0; i < game.num_users(); ++i) {
            std::exponential_distribution<double> draw(1.0);
            double sum = 0.0;
            for (auto& x : q.row(i)) {
                x = draw(rng);
                sum += x;
            }
            for (auto& x : q.row(i)) {
                x *= game.demand(i) / sum;
            }
        }
        for (double eta = opt.perturbation; eta > 1e-8; eta *= 0.5) {
            detail::AscentState st;
            st.profile = StrategyProfile(game.num_users(), game.num_links());
            for (std::size_t i = 0; i < game.num_users(); ++i) {
                for (std::size_t l = 0; l < game.num_links(); ++l) {
                    st.profile(i, l) = (1.0 - eta) * base.profile(i, l) + eta * q(i, l);
                }
            }
            st.gains = detail::gains_of(game, st.profile, disagreement);
            if (std::isfinite(detail::log_product(st.gains))) {
                runs.push_back(std::move(st));
                break;
            }
        }
    }

    std::size_t iterations = base.iterations;
    for (auto& st : runs) {
        detail::ascend_nash_product(game, disagreement, st, opt);
        iterations += st.iterations;
    }
    std::size_t best = 0;
    for (std::size_t k = 1; k < runs.size(); ++k) {
        const auto& a = runs[k];
        const auto& b = runs[best];
        if (a.log_product > b.log_product
            || (a.log_product == b.log_product && detail::lexicographically_less(a.profile, b.profile))) {
            best = k;
        }
    }
    // The base run never ends below its start, so neither does the best one.
    if (runs[best].log_product < start_value) {
        best = 0;
    }

    detail::snap_small_flows(game, runs[best].profile, 1e-12);
    auto out = detail::make_outcome(game, runs[best].profile, disagreement, BargainMethod::NashProductAscent);
    out.iterations = iterations;
    bool agree = runs.size() > 1;
    const double ref = std::max(1.0, disagreement.system);
    for (const auto& st : runs) {
        for (std::size_t i = 0; i < game.num_users(); ++i) {
            const double ci = disagreement.per_user[i] - st.gains[i];
            if (std::abs(ci - out.costs.per_user[i]) > opt.agreement_tol * ref) {
                agree = false;
            }
        }
    }
    out.certainty = agree ? NbsCertainty::MultiStartAgreement : NbsCertainty::SingleRun;
    out.converged = runs[best].residual < opt.tol_grad || (runs[best].stalled && runs[best].residual < opt.tol_stall);
    if (!out.converged) {
        throw BargainNoConvergence(out, iterations, runs[best].residual);
    }
    return out;
}

/**
 * Starting point for nbs_general: the flow-exchange profile for homogeneous
 * games when it exists, otherwise the equilibrium.
 */
inline StrategyProfile default_bargaining_start(const Game& game, const SolveReport& nep, const SolveReport& optimum,
                                                std::optional<double> epsilon = std::nullopt)
{
    if (game.is_homogeneous()) {
        try {
            return flow_exchange(game, evaluate_cost(game, nep.profile), optimum, epsilon).profile;
        } catch (const NotEssentialHere&) {
        }
    }
    return nep.profile;
}

inline BargainOutcome nbs_general(const Game& game, const SolverOptions& solver = {}, const BargainOptions& opt = {})
{
    const auto nep = nash_equilibrium(game, solver);
    const auto optimum = social_optimum(game, std::nullopt, solver);
    return nbs_general(game, nep, default_bargaining_start(game, nep, optimum, opt.exchange_epsilon), opt);
}

/**
 * The bargaining outcome appropriate to the game: closed forms for identical
 * homogeneous users or two homogeneous users, the ascent otherwise.
 */
inline BargainOutcome bargain(const Game& game, const SolveReport& nep, const SolveReport& optimum,
                              const BargainOptions& opt = {})
{
    if (game.is_homogeneous()) {
        const auto d = game.demands();
        const bool identical = std::all_of(d.begin(), d.end(), [&](double r) {
            return std::abs(r - d.front()) <= 1e-12 * d.front();
        });
        if (identical) {
            return nbs_identical(game, nep, optimum);
        }
        if (game.num_users() == 2) {
            return nbs_two_user(game, nep, optimum);
        }
    }
    return nbs_general(game, nep, default_bargaining_start(game, nep, optimum, opt.exchange_epsilon), opt);
}

} // namespace routebargain

#endif // ROUTEBARGAIN_BARGAINING_HPP
