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
 * \file routebargain/water_filling.hpp
 *
 * \brief Bisection on a common marginal level for monotone KKT systems.
 *
 * Given per-link responses x_l(level), each nondecreasing in the level, find
 * the level at which the responses add up to the demand. Links whose
 * marginal at zero flow is above the level stay empty.
 */

#ifndef ROUTEBARGAIN_WATER_FILLING_HPP
#define ROUTEBARGAIN_WATER_FILLING_HPP

#include <routebargain/cost_model.hpp>
#include <routebargain/errors.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

namespace routebargain {

/// One link as seen by a single decision maker: its cost model and the flow others put there.
struct ModelTerm
{
    const CostModel* model;
    double others = 0.0;

    double floor() const { return model->marginal(0.0, others); }
    double supremum() const { return model->own_supremum(others); }
    double response(double level, double cap) const { return model->response(level, others, cap); }
};

struct WaterFill
{
    std::vector<double> flows;
    double level = 0.0;
};

template <class Term>
WaterFill water_fill(std::span<const Term> terms, double demand)
{
    const std::size_t L = terms.size();
    WaterFill out;
    out.flows.assign(L, 0.0);

    double lo = infinity;
    double capacity = 0.0;
    for (const auto& t : terms) {
        const double f = t.floor();
        if (std::isfinite(f)) {
            lo = std::min(lo, f);
        }
        capacity += t.supremum();
    }
    if (!std::isfinite(lo) || !(capacity > demand)) {
        throw CapacityExhausted("links cannot carry the requested demand");
    }
    if (demand <= 0.0) {
        out.level = lo;
        return out;
    }

    auto total = [&](double level) {
        double s = 0.0;
        for (const auto& t : terms) {
            s += t.response(level, demand);
        }
        return s;
    };

    double hi = lo > 0.0 ? 2.0 * lo : 1.0;
    int doublings = 0;
    while (total(hi) < demand) {
        lo = hi;
        hi *= 2.0;
        if (++doublings > 4000 || !std::isfinite(hi)) {
            throw CapacityExhausted("no finite marginal level carries the demand");
        }
    }
    // Illinois-modified regula falsi on S(level) - demand, kept inside [lo, hi].
    double g_lo = total(lo) - demand;
    double g_hi = total(hi) - demand;
    int side = 0;
    for (int it = 0; it < 300; ++it) {
        if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * hi) {
            break;
        }
        double mid = g_hi > g_lo ? hi - g_hi * (hi - lo) / (g_hi - g_lo) : 0.5 * (lo + hi);
        if (!(mid > lo && mid < hi) || it % 8 == 7) {
            mid = 0.5 * (lo + hi);
        }
        const double g = total(mid) - demand;
        if (g < 0.0) {
            lo = mid;
            g_lo = g;
            if (side == -1) {
                g_hi *= 0.5;
            }
            side = -1;
        } else {
            hi = mid;
            g_hi = g;
            if (g == 0.0) {
                lo = mid;
                break;
            }
            if (side == 1) {
                g_lo *= 0.5;
            }
            side = 1;
        }
    }

    // Blend the two bracketing responses so that flat marginals still meet the demand.
    std::vector<double> x_lo(L), x_hi(L);
    double s_lo = 0.0, s_hi = 0.0;
    for (std::size_t l = 0; l < L; ++l) {
        x_lo[l] = terms[l].response(lo, demand);
        x_hi[l] = terms[l].response(hi, demand);
        s_lo += x_lo[l];
        s_hi += x_hi[l];
    }
    const double theta = s_hi > s_lo ? std::clamp((demand - s_lo) / (s_hi - s_lo), 0.0, 1.0) : 1.0;
    double sum = 0.0;
    std::size_t largest = 0;
    for (std::size_t l = 0; l < L; ++l) {
        out.flows[l] = x_lo[l] + theta * (x_hi[l] - x_lo[l]);
        sum += out.flows[l];
        if (out.flows[l] > out.flows[largest]) {
            largest = l;
        }
    }
    out.flows[largest] += demand - sum;
    out.level = 0.5 * (lo + hi);
    return out;
}

/// Euclidean projection of `x` onto {y >= 0, sum y = total}, in place.
inline void project_to_simplex(std::span<double> x, double total)
{
    std::vector<double> u(x.begin(), x.end());
    std::sort(u.begin(), u.end(), std::greater<>());
    double cumulative = 0.0;
    double shift = 0.0;
    for (std::size_t k = 0; k < u.size(); ++k) {
        cumulative += u[k];
        const double candidate = (cumulative - total) / static_cast<double>(k + 1);
        if (u[k] - candidate > 0.0) {
            shift = candidate;
        }
    }
    for (auto& v : x) {
        v = std::max(0.0, v - shift);
    }
}

} // namespace routebargain

#endif // ROUTEBARGAIN_WATER_FILLING_HPP
