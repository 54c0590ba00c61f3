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

#ifndef ROUTEBARGAIN_TESTS_GRID_ORACLE_HPP
#define ROUTEBARGAIN_TESTS_GRID_ORACLE_HPP

#include <routebargain/bargaining.hpp>
#include <routebargain/game.hpp>

#include <algorithm>
#include <vector>

namespace rbtest {

struct GridBargain
{
    std::vector<double> costs;
    double nash_product = 0.0;
    /// User flows on link 1 at the best grid point.
    double x0 = 0.0;
    double x1 = 0.0;
};

/// Best grid point of the box [a_lo, a_hi] x [b_lo, b_hi] of link-1 flows.
inline GridBargain grid_scan(const routebargain::Game& g, const routebargain::CostVector& disagreement, double a_lo,
                             double a_hi, double b_lo, double b_hi, int n)
{
    GridBargain out;
    out.costs.assign(2, 0.0);
    for (int i = 0; i <= n; ++i) {
        for (int k = 0; k <= n; ++k) {
            routebargain::StrategyProfile p(2, 2);
            p(0, 0) = a_lo + (a_hi - a_lo) * i / n;
            p(0, 1) = g.demand(0) - p(0, 0);
            p(1, 0) = b_lo + (b_hi - b_lo) * k / n;
            p(1, 1) = g.demand(1) - p(1, 0);
            const auto c = routebargain::detail::costs_unchecked(g, p);
            const double v = routebargain::nash_product(c, disagreement);
            if (v > out.nash_product) {
                out = {c.per_user, v, p(0, 0), p(1, 0)};
            }
        }
    }
    return out;
}

/**
 * Nash product maximum over every pure profile of a two-user two-link game, by nested grid refinement.
 *
 * While no grid point improves on the equilibrium for both users, the window shrinks around it.
 */
inline GridBargain grid_bargain(const routebargain::Game& g, const routebargain::StrategyProfile& nep,
                                int n = 200, int levels = 4)
{
    const auto d = routebargain::evaluate_cost(g, nep);
    const double r0 = g.demand(0), r1 = g.demand(1);
    double wa = r0, wb = r1;
    GridBargain best;
    for (int zoom = 0; zoom < 12 && best.nash_product <= 0.0; ++zoom, wa *= 0.1, wb *= 0.1) {
        best = grid_scan(g, d, std::max(0.0, nep(0, 0) - wa), std::min(r0, nep(0, 0) + wa),
                         std::max(0.0, nep(1, 0) - wb), std::min(r1, nep(1, 0) + wb), n);
    }
    wa *= 10.0;
    wb *= 10.0;
    for (int level = 1; level < levels; ++level) {
        wa *= 4.0 / n;
        wb *= 4.0 / n;
        const auto next = grid_scan(g, d, std::max(0.0, best.x0 - wa), std::min(r0, best.x0 + wa),
                                    std::max(0.0, best.x1 - wb), std::min(r1, best.x1 + wb), n);
        if (next.nash_product > best.nash_product) {
            best = next;
        }
    }
    return best;
}

} // namespace rbtest

#endif // ROUTEBARGAIN_TESTS_GRID_ORACLE_HPP
