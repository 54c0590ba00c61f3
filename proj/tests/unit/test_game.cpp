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

#include "support/instances.hpp"

#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>

using namespace routebargain;
using Catch::Approx;

namespace {

Game two_mm1(double c1, double c2, std::vector<double> demands)
{
    std::vector<UserSpec> users;
    for (double r : demands) {
        users.push_back({r, {CostModel::mm1(c1), CostModel::mm1(c2)}, 0});
    }
    return Game(std::vector<LinkSpec>(2), std::move(users));
}

} // namespace

TEST_CASE("games need links, users and matching cost lists", "[game]")
{
    CHECK_THROWS_AS(Game({}, {UserSpec{1.0, {}, 0}}), InvalidGame);
    CHECK_THROWS_AS(Game(std::vector<LinkSpec>(1), {}), InvalidGame);
    CHECK_THROWS_AS(Game(std::vector<LinkSpec>(2), {UserSpec{1.0, {CostModel::mm1(3)}, 0}}), InvalidGame);
    CHECK_THROWS_AS(Game(std::vector<LinkSpec>(1), {UserSpec{-1.0, {CostModel::mm1(3)}, 0}}), InvalidGame);
    CHECK_THROWS_AS(Game({LinkSpec{-2.0, 0}}, {UserSpec{1.0, {CostModel::mm1(3)}, 0}}), InvalidGame);
}

TEST_CASE("shared M/M/1 links must leave spare capacity", "[game]")
{
    CHECK_THROWS_AS(two_mm1(2, 2, {4.0}), InvalidGame);
    CHECK_THROWS_AS(two_mm1(2, 2, {3.0, 1.5}), InvalidGame);
    CHECK_NOTHROW(two_mm1(2, 2, {3.9}));
}

TEST_CASE("links are sorted by descending capacity, keeping their input position", "[game]")
{
    const auto g = two_mm1(10, 20, {1.0, 2.0});
    REQUIRE(g.links()[0].capacity);
    CHECK(*g.links()[0].capacity == 20.0);
    CHECK(g.links()[0].index == 2);
    CHECK(g.links()[1].index == 1);
    CHECK(g.model(0, 0).capacity() == 20.0);
    CHECK(g.model(1, 1).capacity() == 10.0);
}

TEST_CASE("links without a shared capacity keep their order", "[game]")
{
    const auto g = rbtest::hetero_example(0.05);
    CHECK(g.links()[0].index == 1);
    CHECK_FALSE(g.links()[0].capacity.has_value());
    CHECK(g.model(1, 0).capacity() == Approx(1.05));
}

TEST_CASE("homogeneity classes", "[game]")
{
    CHECK(two_mm1(3, 2, {1.0, 1.0}).homogeneity() == Homogeneity::HomogeneousH5);
    CHECK(rbtest::poa_growth(3, 0.01).homogeneity() == Homogeneity::HomogeneousH14);
    CHECK(rbtest::hetero_example(0.05).homogeneity() == Homogeneity::Standard);
    const Game weighted(std::vector<LinkSpec>(1), {UserSpec{1.0, {CostModel::mm1(3, 2.0)}, 0}});
    CHECK(weighted.homogeneity() == Homogeneity::Standard);
    CHECK(std::string(to_string(Homogeneity::HomogeneousH5)) == "homogeneous-h5");
}

TEST_CASE("evaluate_cost examples", "[game]")
{
    SECTION("zero demand, zero flow")
    {
        const auto g = two_mm1(2, 2, {0.0});
        const auto c = evaluate_cost(g, StrategyProfile(1, 2));
        CHECK(c.per_user[0] == 0.0);
        CHECK(c.system == 0.0);
    }
    SECTION("both users on link 1")
    {
        const double eps = 0.05;
        const auto g = rbtest::hetero_example(eps);
        StrategyProfile p(2, 2);
        p(0, 0) = 0.5;
        p(1, 0) = 0.5;
        const auto c = evaluate_cost(g, p);
        CHECK(c.per_user[0] == Approx(0.5));
        CHECK(c.per_user[1] == Approx(10.0));
    }
    SECTION("users on different links")
    {
        const double eps = 0.05;
        const auto g = rbtest::hetero_example(eps);
        StrategyProfile p(2, 2);
        p(0, 1) = 0.5;
        p(1, 0) = 0.5;
        CHECK(evaluate_cost(g, p).system == Approx(1.5 + 0.5 / (0.5 + eps)));
        CHECK(evaluate_cost(g, p).system == Approx(2.409).margin(1e-3));
    }
}

TEST_CASE("infeasible profiles are rejected", "[game]")
{
    const auto g = two_mm1(3, 2, {1.0, 1.0});
    StrategyProfile p(2, 2);
    p(0, 0) = 1.0;
    p(1, 0) = 0.5;
    CHECK_THROWS_AS(evaluate_cost(g, p), InfeasibleProfile);
    p(1, 1) = 0.5;
    CHECK_NOTHROW(evaluate_cost(g, p));
    p(1, 0) = -0.1;
    p(1, 1) = 1.1;
    CHECK_THROWS_AS(evaluate_cost(g, p), InfeasibleProfile);
    CHECK_THROWS_AS(evaluate_cost(g, StrategyProfile(1, 2)), InfeasibleProfile);
}

TEST_CASE("flows at or above capacity cost infinity", "[game]")
{
    const auto g = two_mm1(3, 1, {2.5});
    StrategyProfile p(1, 2);
    p(0, 1) = 2.5;
    const auto c = evaluate_cost(g, p);
    CHECK(std::isinf(c.per_user[0]));
    CHECK(std::isinf(c.system));
}

TEST_CASE("marginal_cost examples and domain", "[game]")
{
    const Game lin(std::vector<LinkSpec>(1), {UserSpec{1.0, {CostModel::linear(0, 1)}, 0}});
    CHECK(marginal_cost(lin, 0, 0, 0.5, 1.0) == Approx(1.5));
    const auto g = two_mm1(2, 2, {1.0});
    CHECK(marginal_cost(g, 0, 0, 0.0, 0.0) == Approx(0.5));
    CHECK_THROWS_AS(marginal_cost(g, 0, 0, 0.5, 2.0), DomainError);
    CHECK_THROWS_AS(marginal_cost(g, 0, 0, 0.6, 0.5), DomainError);
    CHECK_THROWS_AS(marginal_cost(g, 0, 0, -0.1, 0.5), DomainError);
}

TEST_CASE("homogeneous system cost depends only on link totals", "[game][property]")
{
    rbtest::Rng rng(21);
    for (int k = 0; k < 20; ++k) {
        const auto g = rbtest::random_h5(rng, 3, 3, 1.0);
        // Equal demands, so shares can be permuted between users freely.
        StrategyProfile p(3, 3);
        for (std::size_t i = 0; i < 3; ++i) {
            double left = g.demand(i);
            for (std::size_t l = 0; l + 1 < 3; ++l) {
                p(i, l) = rng.uniform(0.0, left) * 0.5;
                left -= p(i, l);
            }
            p(i, 2) = left;
        }
        StrategyProfile q(3, 3);
        for (std::size_t i = 0; i < 3; ++i) {
            for (std::size_t l = 0; l < 3; ++l) {
                q(i, l) = p((i + 1) % 3, l);
            }
        }
        const double a = detail::costs_unchecked(g, p).system;
        const double b = detail::costs_unchecked(g, q).system;
        if (std::isfinite(a)) {
            CHECK(a == Approx(b).epsilon(1e-12));
        }
    }
}

TEST_CASE("latency and slope orderings agree across M/M/1 links", "[game][property]")
{
    rbtest::Rng rng(22);
    for (int k = 0; k < 500; ++k) {
        const auto a = CostModel::mm1(rng.uniform(1, 10));
        const auto b = CostModel::mm1(rng.uniform(1, 10));
        const double fa = rng.uniform(0, 0.95 * a.capacity());
        const double fb = rng.uniform(0, 0.95 * b.capacity());
        CHECK((a.latency(fa) <= b.latency(fb)) == (a.latency_slope(fa) <= b.latency_slope(fb)));
    }
}

TEST_CASE("weighted system cost lies within the weight envelope", "[game][property]")
{
    rbtest::Rng rng(23);
    for (int k = 0; k < 200; ++k) {
        const std::size_t N = rng.index(1, 6);
        CostVector c;
        std::vector<double> w(N);
        double ws = 0.0;
        for (std::size_t i = 0; i < N; ++i) {
            c.per_user.push_back(rng.uniform(0.0, 10.0));
            c.system += c.per_user.back();
            w[i] = rng.uniform(0.1, 1.0);
            ws += w[i];
        }
        for (auto& x : w) {
            x /= ws;
        }
        const double lo = *std::min_element(w.begin(), w.end());
        const double hi = *std::max_element(w.begin(), w.end());
        const double weighted = weighted_system_cost(c, w);
        CHECK(lo * c.system <= weighted + 1e-12);
        CHECK(weighted <= hi * c.system + 1e-12);
    }
}

TEST_CASE("strategy profile helpers", "[game]")
{
    StrategyProfile p(2, 3);
    p(0, 0) = 1.0;
    p(1, 0) = 2.0;
    p(1, 2) = 0.5;
    CHECK(p.link_total(0) == 3.0);
    CHECK(p.user_total(1) == 2.5);
    CHECK(p.aggregate() == std::vector<double>{3.0, 0.0, 0.5});
    StrategyProfile q = p;
    q(1, 2) = 0.25;
    CHECK(p.max_abs_diff(q) == 0.25);
    CHECK_FALSE(p == q);
}
