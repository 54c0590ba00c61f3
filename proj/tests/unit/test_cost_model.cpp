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

#include <routebargain/cost_model.hpp>
#include <routebargain/errors.hpp>

#include "support/instances.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>
#include <vector>

using namespace routebargain;
using Catch::Approx;

namespace {

std::vector<CostModel> sample_models()
{
    return {CostModel::mm1(2.0),
            CostModel::mm1(7.5, 1.7),
            CostModel::linear(0.0, 1.0),
            CostModel::linear(1.3, 0.4, 0.6),
            CostModel::power(0.2, 1.1, 1.0),
            CostModel::power(0.5, 0.8, 2.5, 1.4),
            CostModel::power(0.0, 1.0, 5.0)};
}

double upper_total(const CostModel& m)
{
    return m.is_mm1() ? 0.9 * m.capacity() : 3.0;
}

} // namespace

TEST_CASE("latency forms", "[cost]")
{
    CHECK(CostModel::mm1(2).latency(0.0) == Approx(0.5));
    CHECK(CostModel::mm1(2).latency(1.5) == Approx(2.0));
    CHECK(std::isinf(CostModel::mm1(2).latency(2.0)));
    CHECK(std::isinf(CostModel::mm1(2).latency(3.0)));
    CHECK(CostModel::linear(1, 2).latency(0.5) == Approx(2.0));
    CHECK(CostModel::power(1, 2, 3).latency(2.0) == Approx(17.0));
}

TEST_CASE("value is own flow times weighted latency", "[cost]")
{
    CHECK(CostModel::linear(0, 1).value(0.5, 1.0) == Approx(0.5));
    CHECK(CostModel::mm1(20, 2).value(1.0, 10.0) == Approx(2.0 / 10.0));
    CHECK(CostModel::mm1(2).value(0.0, 5.0) == 0.0);
    CHECK(std::isinf(CostModel::mm1(2).value(0.1, 2.0)));
}

TEST_CASE("marginal examples", "[cost]")
{
    CHECK(CostModel::linear(0, 1).marginal(0.5, 1.0) == Approx(1.5));
    CHECK(CostModel::mm1(2).marginal(0.0, 0.0) == Approx(0.5));
    CHECK(std::isinf(CostModel::mm1(2).marginal(0.5, 2.0)));
}

TEST_CASE("marginal matches a central finite difference", "[cost][oracle]")
{
    rbtest::Rng rng(11);
    for (const auto& m : sample_models()) {
        for (int k = 0; k < 200; ++k) {
            const double total = rng.uniform(0.05, upper_total(m));
            const double own = rng.uniform(0.01, total);
            const double others = total - own;
            const double h = 1e-6 * std::max(1.0, own);
            const double fd = (m.value(own + h, others + own + h) - m.value(own - h, others + own - h)) / (2 * h);
            INFO(m.to_string() << " own=" << own << " total=" << total);
            CHECK(m.marginal(own, total) == Approx(fd).epsilon(1e-6));
        }
    }
}

TEST_CASE("total partial and curvature match finite differences", "[cost][oracle]")
{
    rbtest::Rng rng(12);
    for (const auto& m : sample_models()) {
        for (int k = 0; k < 100; ++k) {
            const double total = rng.uniform(0.1, upper_total(m));
            const double own = rng.uniform(0.0, total);
            const double h = 1e-6;
            const double fd = (m.value(own, total + h) - m.value(own, total - h)) / (2 * h);
            CHECK(m.total_partial(own, total) == Approx(fd).epsilon(1e-6).margin(1e-9));
            const double fd2 = (m.latency_slope(total + h) - m.latency_slope(total - h)) / (2 * h);
            CHECK(m.latency_curvature(total) == Approx(fd2).epsilon(1e-5).margin(1e-8));
        }
    }
}

TEST_CASE("costs are monotone and convex in own flow, marginals strictly increasing", "[cost][property]")
{
    rbtest::Rng rng(13);
    for (const auto& m : sample_models()) {
        for (int k = 0; k < 200; ++k) {
            const double others = rng.uniform(0.0, 0.5 * upper_total(m));
            const double room = upper_total(m) - others;
            double a = rng.uniform(0.0, room);
            double b = rng.uniform(0.0, room);
            if (a > b) {
                std::swap(a, b);
            }
            const double mid = 0.5 * (a + b);
            const double ja = m.value(a, a + others);
            const double jb = m.value(b, b + others);
            CHECK(ja <= jb + 1e-15);
            CHECK(m.value(mid, mid + others) <= 0.5 * (ja + jb) + 1e-12 * std::max(1.0, jb));
            if (b > a + 1e-9) {
                CHECK(m.marginal(a, a + others) < m.marginal(b, b + others));
            }
            CHECK(m.marginal(a, a + others) <= m.marginal(a, a + others + 0.1) + 1e-15);
            CHECK(m.value(a, a + others) <= m.value(a, a + others + 0.1) + 1e-15);
        }
    }
}

TEST_CASE("response inverts the marginal", "[cost]")
{
    rbtest::Rng rng(14);
    for (const auto& m : sample_models()) {
        for (int k = 0; k < 100; ++k) {
            const double others = rng.uniform(0.0, 0.5 * upper_total(m));
            const double x = rng.uniform(0.01, 0.4 * upper_total(m));
            const double level = m.marginal(x, x + others);
            CHECK(m.response(level, others, 100.0) == Approx(x).epsilon(1e-8).margin(1e-10));
        }
        const double floor = m.marginal(0.0, 0.0);
        CHECK(m.response(0.5 * floor, 0.0, 100.0) == 0.0);
    }
}

TEST_CASE("linear with zero slope saturates at the cap", "[cost]")
{
    const auto m = CostModel::linear(2.0, 0.0);
    CHECK(m.response(1.0, 0.0, 4.0) == 0.0);
    CHECK(m.response(3.0, 0.0, 4.0) == 4.0);
}

TEST_CASE("invalid parameters are rejected", "[cost]")
{
    CHECK_THROWS_AS(CostModel::mm1(0.0), InvalidGame);
    CHECK_THROWS_AS(CostModel::mm1(-1.0), InvalidGame);
    CHECK_THROWS_AS(CostModel::linear(-1.0, 1.0), InvalidGame);
    CHECK_THROWS_AS(CostModel::power(0.0, 1.0, 0.5), InvalidGame);
    CHECK_THROWS_AS(CostModel::linear(0.0, 1.0, 0.0), InvalidGame);
    CHECK_THROWS_AS(CostModel::mm1(std::nan(""), 1.0), InvalidGame);
}

TEST_CASE("to_string", "[cost]")
{
    CHECK(CostModel::mm1(20).to_string() == "mm1(20)");
    CHECK(CostModel::linear(1, 0.5, 2).to_string() == "linear(1,0.5) * 2");
    CHECK(CostModel::power(0, 1, 3).to_string() == "power(0,1,3)");
}
