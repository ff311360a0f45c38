#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "qnpv/errors.hpp"

namespace qnpv {

/// Market and constraint parameters shared by every project.
///
/// The feasible set is { w : sum w_i = N m, sum w_i^2 <= N tau }, which is
/// non-empty only when tau >= m^2.
struct MarketSpec {
    double rate = 0.1;          // r, per period
    int maturity = 10;          // T, whole periods
    double budget = 1.0;        // m, per project
    double concentration = 3.0; // tau

    /// tau' = tau / m^2
    double normalized_concentration() const noexcept { return concentration / (budget * budget); }

    /// tau - m^2, clamped at zero so that tau == m^2 up to rounding is a single point.
    double excess_concentration() const noexcept {
        const double d = concentration - budget * budget;
        return d > 0.0 ? d : 0.0;
    }

    /// Market with budget m and concentration tau' * m^2.
    static MarketSpec normalized(double rate, int maturity, double tau_norm, double budget = 1.0) {
        return MarketSpec{rate, maturity, budget, tau_norm * budget * budget};
    }
};

namespace detail {

// tau may sit a few ulps below m^2 after rescaling tau' * m^2.
inline constexpr double kConcentrationSlack = 1e-12;

inline void check_rate_and_maturity(double r, int T) {
    if (!(r > 0.0) || !std::isfinite(r)) {
        throw DomainError("interest rate must be positive and finite, got " + std::to_string(r));
    }
    if (T < 1) {
        throw DomainError("maturity must be at least one period, got " + std::to_string(T));
    }
}

// Below this rate the closed forms lose all precision; sum the terms instead.
inline constexpr double kDirectSumRate = 1e-8;

} // namespace detail

inline void validate(const MarketSpec& market) {
    detail::check_rate_and_maturity(market.rate, market.maturity);
    if (!(market.budget > 0.0) || !std::isfinite(market.budget)) {
        throw DomainError("budget m must be positive and finite");
    }
    const double m2 = market.budget * market.budget;
    if (!std::isfinite(market.concentration) ||
        market.concentration < m2 * (1.0 - detail::kConcentrationSlack)) {
        throw DomainError("concentration tau must satisfy tau >= m^2");
    }
}

/// A1 = sum_{t=1..T} (1+r)^{-t} = (1 - (1+r)^{-T}) / r
inline double annuity_factor(double r, int T) {
    detail::check_rate_and_maturity(r, T);
    if (r < detail::kDirectSumRate) {
        double sum = 0.0;
        double d = 1.0;
        for (int t = 1; t <= T; ++t) {
            d /= 1.0 + r;
            sum += d;
        }
        return sum;
    }
    return -std::expm1(-T * std::log1p(r)) / r;
}

/// A2 = sum_{t=1..T} (1+r)^{-2t} = (1 - (1+r)^{-2T}) / (r^2 + 2r)
inline double squared_annuity_factor(double r, int T) {
    detail::check_rate_and_maturity(r, T);
    if (r < detail::kDirectSumRate) {
        double sum = 0.0;
        double d = 1.0;
        const double step = 1.0 / ((1.0 + r) * (1.0 + r));
        for (int t = 1; t <= T; ++t) {
            d *= step;
            sum += d;
        }
        return sum;
    }
    return -std::expm1(-2.0 * T * std::log1p(r)) / (r * (r + 2.0));
}

/// (1+r)^{-T}
inline double terminal_discount(double r, int T) {
    detail::check_rate_and_maturity(r, T);
    return std::exp(-T * std::log1p(r));
}

struct DiscountFactors {
    double a1 = 0.0;
    double a2 = 0.0;
    double terminal = 0.0;
};

inline DiscountFactors discount_factors(double r, int T) {
    return {annuity_factor(r, T), squared_annuity_factor(r, T), terminal_discount(r, T)};
}

/// Per-period discount factors (1+r)^{-t} for t = 1..T.
inline std::vector<double> discount_curve(double r, int T) {
    detail::check_rate_and_maturity(r, T);
    std::vector<double> d(static_cast<std::size_t>(T));
    const double l = std::log1p(r);
    for (int t = 1; t <= T; ++t) d[static_cast<std::size_t>(t - 1)] = std::exp(-t * l);
    return d;
}

/// B = c A1 + lambda (1+r)^{-T}: discounted payoff of one unit invested with zero noise.
inline double unit_terminal_payoff(double c, double lambda, double r, int T) {
    if (!(c >= 0.0) || !(lambda >= 0.0)) {
        throw DomainError("coupon and attenuation rates must be non-negative");
    }
    return c * annuity_factor(r, T) + lambda * terminal_discount(r, T);
}

} // namespace qnpv
