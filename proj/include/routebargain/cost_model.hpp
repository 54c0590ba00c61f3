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
 * \file routebargain/cost_model.hpp
 *
 * \brief Per-link user cost functions.
 *
 * Every supported form has the shape
 *
 *   J(x, f) = w * x * T(f)
 *
 * where x is the user's own flow on the link, f the total flow on the link,
 * w a positive user weight and T a strictly increasing, convex latency:
 *
 *   mm1(c)         T(f) = 1 / (c - f)   (+inf for f >= c)
 *   linear(a,b)    T(f) = a + b f
 *   power(a,b,d)   T(f) = a + b f^d
 *
 * The marginal cost seen by the user is d/dx J(x, o + x) = w (T(f) + x T'(f)).
 */

#ifndef ROUTEBARGAIN_COST_MODEL_HPP
#define ROUTEBARGAIN_COST_MODEL_HPP

#include <routebargain/errors.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>
#include <variant>

namespace routebargain {

inline constexpr double infinity = std::numeric_limits<double>::infinity();

struct MM1
{
    double capacity;
    bool operator==(const MM1&) const = default;
};

struct Linear
{
    double a;
    double b;
    bool operator==(const Linear&) const = default;
};

struct Power
{
    double a;
    double b;
    double d;
    bool operator==(const Power&) const = default;
};

using CostForm = std::variant<MM1, Linear, Power>;

class CostModel
{
public:
    CostModel(CostForm form, double weight = 1.0) : form_(form), weight_(weight)
    {
        if (!(weight > 0.0) || !std::isfinite(weight)) {
            throw InvalidGame("cost model weight must be positive and finite");
        }
        std::visit([](const auto& f) { validate(f); }, form_);
    }

    static CostModel mm1(double c, double weight = 1.0) { return {MM1{c}, weight}; }
    static CostModel linear(double a, double b, double weight = 1.0) { return {Linear{a, b}, weight}; }
    static CostModel power(double a, double b, double d, double weight = 1.0)
    {
        return {Power{a, b, d}, weight};
    }

    const CostForm& form() const noexcept { return form_; }
    double weight() const noexcept { return weight_; }
    bool is_mm1() const noexcept { return std::holds_alternative<MM1>(form_); }

    /// Capacity of an M/M/1 form, +inf for the uncapacitated forms.
    double capacity() const noexcept
    {
        if (const auto* q = std::get_if<MM1>(&form_)) {
            return q->capacity;
        }
        return infinity;
    }

    /// Unweighted latency T(f).
    double latency(double total) const noexcept
    {
        return std::visit(
            [total](const auto& f) -> double {
                using F = std::decay_t<decltype(f)>;
                if constexpr (std::is_same_v<F, MM1>) {
                    return total < f.capacity ? 1.0 / (f.capacity - total) : infinity;
                } else if constexpr (std::is_same_v<F, Linear>) {
                    return f.a + f.b * total;
                } else {
                    return f.a + f.b * std::pow(total, f.d);
                }
            },
            form_);
    }

    /// Unweighted latency slope T'(f).
    double latency_slope(double total) const noexcept
    {
        return std::visit(
            [total](const auto& f) -> double {
                using F = std::decay_t<decltype(f)>;
                if constexpr (std::is_same_v<F, MM1>) {
                    if (!(total < f.capacity)) {
                        return infinity;
                    }
                    const double gap = f.capacity - total;
                    return 1.0 / (gap * gap);
                } else if constexpr (std::is_same_v<F, Linear>) {
                    return f.b;
                } else {
                    return f.b * f.d * std::pow(total, f.d - 1.0);
                }
            },
            form_);
    }

    /// T''(total).
    double latency_curvature(double total) const noexcept
    {
        return std::visit(
            [total](const auto& f) -> double {
                using F = std::decay_t<decltype(f)>;
                if constexpr (std::is_same_v<F, MM1>) {
                    if (!(total < f.capacity)) {
                        return infinity;
                    }
                    const double gap = f.capacity - total;
                    return 2.0 / (gap * gap * gap);
                } else if constexpr (std::is_same_v<F, Linear>) {
                    return 0.0;
                } else {
                    if (f.d == 1.0) {
                        return 0.0;
                    }
                    if (total <= 0.0) {
                        return f.d < 2.0 ? infinity : (f.d == 2.0 ? 2.0 * f.b : 0.0);
                    }
                    return f.b * f.d * (f.d - 1.0) * std::pow(total, f.d - 2.0);
                }
            },
            form_);
    }

    /// J(own, total). A user with no flow on the link pays nothing, even above capacity.
    double value(double own, double total) const noexcept
    {
        if (own <= 0.0) {
            return 0.0;
        }
        return weight_ * own * latency(total);
    }

    /// d/dx J(x, o + x) at x = own, o = total - own. +inf outside the domain.
    double marginal(double own, double total) const noexcept
    {
        const double t = latency(total);
        if (!std::isfinite(t)) {
            return infinity;
        }
        if (own <= 0.0) {
            return weight_ * t;
        }
        return weight_ * (t + own * latency_slope(total));
    }

    /// Partial derivative of J with respect to the total flow, own flow fixed.
    double total_partial(double own, double total) const noexcept
    {
        if (own <= 0.0) {
            return 0.0;
        }
        return weight_ * own * latency_slope(total);
    }

    /// Largest own flow with finite cost given the other users' flow.
    double own_supremum(double others) const noexcept
    {
        const double c = capacity();
        return std::isfinite(c) ? std::max(0.0, c - others) : infinity;
    }

    /**
     * Inverse of the marginal: the own flow x in [0, cap] at which
     * marginal(x, others + x) equals level, clamped to the interval ends.
     * Flat marginals (b = 0) jump from 0 to cap.
     */
    double response(double level, double others, double cap) const noexcept
    {
        if (cap <= 0.0 || !(level > marginal(0.0, others))) {
            return 0.0;
        }
        return std::visit(
            [&](const auto& f) -> double {
                using F = std::decay_t<decltype(f)>;
                if constexpr (std::is_same_v<F, MM1>) {
                    const double gap = f.capacity - others;
                    const double x = gap - std::sqrt(weight_ * gap / level);
                    return std::clamp(x, 0.0, std::min(cap, gap));
                } else if constexpr (std::is_same_v<F, Linear>) {
                    if (f.b <= 0.0) {
                        return cap;
                    }
                    const double x = (level / weight_ - f.a - f.b * others) / (2.0 * f.b);
                    return std::clamp(x, 0.0, cap);
                } else {
                    if (f.b <= 0.0) {
                        return cap;
                    }
                    return power_response(level, others, cap);
                }
            },
            form_);
    }

    std::string to_string() const
    {
        char buf[160];
        std::visit(
            [&](const auto& f) {
                using F = std::decay_t<decltype(f)>;
                if constexpr (std::is_same_v<F, MM1>) {
                    std::snprintf(buf, sizeof buf, "mm1(%.12g)", f.capacity);
                } else if constexpr (std::is_same_v<F, Linear>) {
                    std::snprintf(buf, sizeof buf, "linear(%.12g,%.12g)", f.a, f.b);
                } else {
                    std::snprintf(buf, sizeof buf, "power(%.12g,%.12g,%.12g)", f.a, f.b, f.d);
                }
            },
            form_);
        std::string s = buf;
        if (weight_ != 1.0) {
            std::snprintf(buf, sizeof buf, " * %.12g", weight_);
            s += buf;
        }
        return s;
    }

    bool operator==(const CostModel&) const = default;

private:
    static void validate(const MM1& f)
    {
        if (!(f.capacity > 0.0) || !std::isfinite(f.capacity)) {
            throw InvalidGame("mm1 capacity must be positive and finite");
        }
    }
    static void validate(const Linear& f)
    {
        if (!(f.a >= 0.0) || !(f.b >= 0.0) || !std::isfinite(f.a) || !std::isfinite(f.b)) {
            throw InvalidGame("linear coefficients must be non-negative and finite");
        }
    }
    static void validate(const Power& f)
    {
        if (!(f.a >= 0.0) || !(f.b >= 0.0) || !std::isfinite(f.a) || !std::isfinite(f.b)) {
            throw InvalidGame("power coefficients must be non-negative and finite");
        }
        if (!(f.d >= 1.0) || !std::isfinite(f.d)) {
            throw InvalidGame("power exponent must be >= 1");
        }
    }

    /// Newton from the right on the convex, increasing power-law marginal.
    double power_response(double level, double others, double cap) const noexcept
    {
        const auto& f = std::get<Power>(form_);
        double hi = cap;
        if (!std::isfinite(hi)) {
            hi = std::max(1.0, others);
            while (marginal(hi, others + hi) < level && hi < 1e300) {
                hi *= 2.0;
            }
        } else if (marginal(hi, others + hi) <= level) {
            return cap;
        }
        auto slope = [&](double x) {
            const double t = others + x;
            double s = 2.0 * f.d * std::pow(t, f.d - 1.0);
            if (f.d > 1.0 && x > 0.0) {
                s += f.d * (f.d - 1.0) * x * std::pow(t, f.d - 2.0);
            }
            return weight_ * f.b * s;
        };
        double lo = 0.0;
        double x = hi;
        for (int it = 0; it < 200; ++it) {
            const double excess = marginal(x, others + x) - level;
            if (excess <= 0.0) {
                lo = std::max(lo, x);
                break;
            }
            hi = x;
            const double s = slope(x);
            double next = s > 0.0 && std::isfinite(s) ? x - excess / s : 0.5 * (lo + x);
            if (!(next > lo)) {
                next = 0.5 * (lo + x);
            }
            if (x - next <= 1e-15 * x) {
                return next;
            }
            x = next;
        }
        // Newton overshoot to the left only through rounding; finish by bisection.
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (lo + hi);
            if (mid <= lo || mid >= hi) {
                break;
            }
            (marginal(mid, others + mid) < level ? lo : hi) = mid;
        }
        return 0.5 * (lo + hi);
    }

    CostForm form_;
    double weight_;
};

} // namespace routebargain

#endif // ROUTEBARGAIN_COST_MODEL_HPP
