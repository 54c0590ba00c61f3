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

#include <routebargain/errors.hpp>
#include <routebargain/game.hpp>
#include <routebargain/solvers.hpp>

#include "support/instances.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>

using namespace routebargain;
using Catch::Approx;

namespace {

Game mm1_game(std::vector<double> caps, std::vector<double> demands)
{
    std::vector<UserSpec> users;
    for (double r : demands) {
        UserSpec u{r, {}, 0};
        for (double c : caps) {
            u.cost_models.push_back(CostModel::mm1(c));
        }
        users.push_back(std::move(u));
    }
    return Game(std::vector<LinkSpec>(caps.size()), std::move(users));
}

/// Independent M/M/1 KKT check: x/(c-f) marginals equalized on used links.
double mm1_nash_residual(const std::vector<double>& caps, const StrategyProfile& p)
{
    double worst = 0.0;
    for (std::size_t i = 0; i < p.num_users(); ++i) {
        double lam = 1e300;
        std::vector<double> marg;
        for (std::size_t l = 0; l < caps.size(); ++l) {
            const double gap = caps[l] - p.link_total(l);
            marg.push_back(1.0 / gap + p(i, l) / (gap * gap));
            if (p(i, l) > 0.0) {
                lam = std::min(lam, marg.back());
            }
        }
        for (std::size_t l = 0; l < caps.size(); ++l) {
            if (p(i, l) > 0.0) {
                worst = std::max(worst, std::abs(marg[l] - lam));
            } else {
                worst = std::max(worst, lam - marg[l]);
            }
        }
    }
    return worst;
}

} // namespace

TEST_CASE("best response on symmetric links splits evenly", "[solvers]")
{
    const auto g = mm1_game({2, 2}, {1.0});
    const std::vector<double> others = {0.0, 0.0};
    const auto br = best_response(g, 0, others);
    CHECK(br.flows[0] == Approx(0.5).epsilon(1e-12));
    CHECK(br.flows[1] == Approx(0.5).epsilon(1e-12));
}

TEST_CASE("best response matches a fine grid search", "[solvers][oracle]")
{
    const auto g = mm1_game({2, 2}, {0.5});
    const std::vector<double> others = {0.5, 0.0};
    const auto br = best_response(g, 0, others);
    CHECK(br.flows[1] > br.flows[0]);
    const double r = 0.5;
    double best = 1e300;
    for (int k = 0; k <= 5000000; ++k) {
        const double x = r * k / 5000000.0;
        const double y = r - x;
        best = std::min(best, x / (2.0 - 0.5 - x) + y / (2.0 - y));
    }
    const double got = br.flows[0] / (1.5 - br.flows[0]) + br.flows[1] / (2.0 - br.flows[1]);
    CHECK(got == Approx(best).epsilon(1e-6));
    CHECK(got <= best + 1e-12);
}

TEST_CASE("best response reports capacity exhaustion", "[solvers]")
{
    const auto g = mm1_game({2, 2}, {1.0});
    const std::vector<double> others = {1.8, 1.5};
    CHECK_THROWS_AS(best_response(g, 0, others), CapacityExhausted);
}

TEST_CASE("single user equilibrium is its own optimum", "[solvers]")
{
    const auto g = mm1_game({5, 3, 1}, {4.0});
    const auto nep = nash_equilibrium(g);
    const auto opt = social_optimum(g);
    CHECK(nep.converged);
    CHECK(nep.profile.max_abs_diff(opt.profile) < 1e-7);
}

TEST_CASE("identical users split every link equally at equilibrium", "[solvers]")
{
    const auto g = rbtest::poa_growth(5, 0.01);
    const auto nep = nash_equilibrium(g);
    for (std::size_t l = 0; l < 2; ++l) {
        const double share = nep.profile.link_total(l) / 5.0;
        for (std::size_t i = 0; i < 5; ++i) {
            CHECK(nep.profile(i, l) == Approx(share).margin(1e-7));
        }
    }
}

TEST_CASE("heterogeneous example equilibrium uses only link 1", "[solvers]")
{
    const auto g = rbtest::hetero_example(0.05);
    const auto nep = nash_equilibrium(g);
    CHECK(nep.profile(0, 1) == 0.0);
    CHECK(nep.profile(1, 1) == 0.0);
    const auto c = evaluate_cost(g, nep.profile);
    CHECK(c.per_user[0] == Approx(0.5).epsilon(1e-9));
    CHECK(c.per_user[1] == Approx(10.0).epsilon(1e-9));
}

TEST_CASE("three user equilibrium satisfies the M/M/1 optimality conditions", "[solvers][oracle]")
{
    const auto g = rbtest::three_user_example();
    const auto nep = nash_equilibrium(g);
    CHECK(nep.converged);
    CHECK(nep.kkt_residual <= 1e-7);
    CHECK(mm1_nash_residual({20, 10}, nep.profile) < 1e-7);
}

TEST_CASE("social optimum examples", "[solvers]")
{
    const auto sym = social_optimum(mm1_game({2, 2}, {1.0}));
    CHECK(sym.profile(0, 0) == Approx(0.5).epsilon(1e-10));

    SECTION("two M/M/1 links, total 15")
    {
        const auto g = mm1_game({20, 10}, {0.1, 7.45, 7.45});
        const auto opt = social_optimum(g);
        // (f T(f))' = c/(c-f)^2 equal on both links: (c1 - f)/(c2 - (R - f)) = sqrt(c1/c2).
        const double exact = 15.0 * std::sqrt(2.0) - 10.0;
        double lo = 5.0, hi = 15.0;
        for (int it = 0; it < 200; ++it) {
            const double f = 0.5 * (lo + hi);
            const double d = 20.0 / ((20.0 - f) * (20.0 - f)) - 10.0 / ((10.0 - 15.0 + f) * (10.0 - 15.0 + f));
            (d < 0 ? lo : hi) = f;
        }
        CHECK(exact == Approx(0.5 * (lo + hi)).epsilon(1e-12));
        CHECK(opt.profile.link_total(0) == Approx(exact).epsilon(1e-9));
        CHECK(opt.profile.link_total(0) == Approx(11.2132).margin(1e-4));
    }
}

TEST_CASE("social optimum rejects weights that do not sum to one", "[solvers]")
{
    const auto g = mm1_game({3, 2}, {1.0, 1.0});
    CHECK_THROWS(social_optimum(g, std::vector<double>{0.5, 0.6}));
    CHECK_THROWS(social_optimum(g, std::vector<double>{1.0}));
}

TEST_CASE("uniform weights reproduce the unweighted optimum", "[solvers]")
{
    const auto g = mm1_game({3, 2}, {1.0, 1.5});
    const auto a = social_optimum(g);
    const auto b = social_optimum(g, std::vector<double>{0.5, 0.5});
    CHECK(a.profile.aggregate()[0] == Approx(b.profile.aggregate()[0]).epsilon(1e-9));
    CHECK(b.objective == Approx(0.5 * a.objective).epsilon(1e-9));
}

TEST_CASE("descent optimum beats random feasible profiles", "[solvers][oracle]")
{
    rbtest::Rng rng(41);
    for (int k = 0; k < 5; ++k) {
        const auto g = rbtest::random_standard(rng, 3, 3);
        const auto opt = social_optimum(g);
        CHECK(opt.converged);
        const double best = evaluate_cost(g, opt.profile).system;
        for (int s = 0; s < 2000; ++s) {
            StrategyProfile p(3, 3);
            for (std::size_t i = 0; i < 3; ++i) {
                double a = rng.uniform(0, 1), b = rng.uniform(0, 1), c = rng.uniform(0, 1);
                const double t = a + b + c;
                p(i, 0) = g.demand(i) * a / t;
                p(i, 1) = g.demand(i) * b / t;
                p(i, 2) = g.demand(i) - p(i, 0) - p(i, 1);
            }
            CHECK(detail::costs_unchecked(g, p).system >= best - 1e-9);
        }
    }
}

TEST_CASE("weighted descent optimum beats random feasible profiles", "[solvers][oracle]")
{
    rbtest::Rng rng(42);
    const auto g = rbtest::random_h5(rng, 2, 3);
    const std::vector<double> w = {0.8, 0.2};
    const auto opt = social_optimum(g, w);
    CHECK(opt.converged);
    for (int s = 0; s < 3000; ++s) {
        StrategyProfile p(2, 3);
        for (std::size_t i = 0; i < 2; ++i) {
            double a = rng.uniform(0, 1), b = rng.uniform(0, 1), c = rng.uniform(0, 1);
            const double t = a + b + c;
            p(i, 0) = g.demand(i) * a / t;
            p(i, 1) = g.demand(i) * b / t;
            p(i, 2) = g.demand(i) - p(i, 0) - p(i, 1);
        }
        const auto c = detail::costs_unchecked(g, p);
        if (std::isfinite(c.system)) {
            CHECK(weighted_system_cost(c, w) >= opt.objective - 1e-9);
        }
    }
}

TEST_CASE("perceived optimum", "[solvers]")
{
    SECTION("single user equals the social optimum")
    {
        const auto g = mm1_game({4, 2}, {3.0});
        CHECK(perceived_optimum(g, 0).objective == Approx(social_optimum(g).objective).epsilon(1e-10));
    }
    SECTION("homogeneous users all see the social optimum")
    {
        const auto g = mm1_game({4, 2}, {1.0, 2.0});
        const double j = social_optimum(g).objective;
        CHECK(perceived_optimum(g, 0).objective == Approx(j).epsilon(1e-10));
        CHECK(perceived_optimum(g, 1).objective == Approx(j).epsilon(1e-10));
    }
    SECTION("the M/M/1 user of the heterogeneous example pays 1/eps")
    {
        const double eps = 0.05;
        const auto rep = perceived_optimum(rbtest::hetero_example(eps), 1);
        CHECK(rep.profile(0, 0) == Approx(1.0));
        CHECK(rep.objective == Approx(1.0 / eps).epsilon(1e-9));
    }
}

TEST_CASE("too few sweeps raise NoConvergence", "[solvers]")
{
    SolverOptions opt;
    opt.max_iters = 1;
    try {
        (void)nash_equilibrium(rbtest::three_user_example(), opt);
        FAIL("expected NoConvergence");
    } catch (const NoConvergence& e) {
        CHECK(e.iterations() == 1);
        CHECK(e.residual() > opt.tol_kkt);
    }
}

TEST_CASE("nash_kkt measures the residual of any profile", "[solvers]")
{
    const auto g = mm1_game({2, 2}, {1.0});
    StrategyProfile p(1, 2);
    p(0, 0) = 0.5;
    p(0, 1) = 0.5;
    CHECK(nash_kkt(g, p).kkt_residual == Approx(0.0).margin(1e-15));
    p(0, 0) = 0.8;
    p(0, 1) = 0.2;
    CHECK(nash_kkt(g, p).kkt_residual > 0.1);
}
