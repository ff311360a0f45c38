#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <utility>

#include "qnpv/discounting.hpp"
#include "qnpv/errors.hpp"

namespace qnpv {

/// Population moments over the project ensemble, <f> = (1/N) sum_i f(c_i, v_i, lambda_i).
struct MomentSet {
    double mean_c = 0.0;
    double mean_lambda = 0.0;
    double mean_c2v = 0.0;     // <c^2 v>
    double var_c = 0.0;        // <c^2> - <c>^2
    double var_lambda = 0.0;   // <lambda^2> - <lambda>^2
    double cov_c_lambda = 0.0; // <c lambda> - <c><lambda>
};

inline void validate(const MomentSet& s) {
    if (!(s.var_c >= 0.0) || !(s.var_lambda >= 0.0) || !(s.mean_c2v >= 0.0)) {
        throw DomainError("moments: variances and <c^2 v> must be non-negative");
    }
    const double bound = std::sqrt(s.var_c * s.var_lambda);
    if (!(std::abs(s.cov_c_lambda) <= bound * (1.0 + 1e-12) + 1e-300)) {
        throw DomainError("moments: covariance violates Cauchy-Schwarz");
    }
}

/// Thermodynamic-limit results for one market.
struct ReplicaResult {
    double kappa = 0.0;    // quenched maximal NPV per project
    double kappa_or = 0.0; // annealed maximal expected NPV per project
    double theta = 0.0;
    double k = 0.0;
    double v_term = 0.0;   // V
    double mean_h = 0.0;   // <h>
    double var_h = 0.0;    // A2 <c^2 v> + V
};

/// V = <(A1 (c - <c>) + (lambda - <lambda>)(1+r)^{-T})^2>
inline double composite_variance(const MomentSet& s, const MarketSpec& market) {
    validate(s);
    const auto f = discount_factors(market.rate, market.maturity);
    const double v = f.a1 * f.a1 * s.var_c + f.terminal * f.terminal * s.var_lambda +
                     2.0 * f.a1 * f.terminal * s.cov_c_lambda;
    return v > 0.0 ? v : 0.0;
}

/// <h> = -1 + A1 <c> + <lambda> (1+r)^{-T}
inline double expected_unit_return(const MomentSet& s, const MarketSpec& market) {
    const auto f = discount_factors(market.rate, market.maturity);
    return -1.0 + f.a1 * s.mean_c + f.terminal * s.mean_lambda;
}

/// <h^2> - <h>^2 = A2 <c^2 v> + V
inline double unit_return_variance(const MomentSet& s, const MarketSpec& market) {
    return squared_annuity_factor(market.rate, market.maturity) * s.mean_c2v +
           composite_variance(s, market);
}

/// kappa_OR = m (-1 + A1 <c> + <lambda> (1+r)^{-T}); independent of v and tau.
inline double kappa_annealed(const MomentSet& s, const MarketSpec& market) {
    validate(market);
    validate(s);
    return market.budget * expected_unit_return(s, market);
}

/// kappa = kappa_OR + sqrt(tau - m^2) sqrt(A2 <c^2 v> + V).
inline double kappa_quenched(const MomentSet& s, const MarketSpec& market) {
    const double annealed = kappa_annealed(s, market);
    const double fluctuation =
        std::sqrt(market.excess_concentration()) * std::sqrt(unit_return_variance(s, market));
    return annealed + fluctuation;
}

struct OrderParameters {
    double theta = 0.0;
    double k = 0.0;
};

/// theta = sqrt(Var h / (tau - m^2)), k = theta m - <h>.
inline OrderParameters order_parameters(const MomentSet& s, const MarketSpec& market) {
    validate(market);
    validate(s);
    const double excess = market.excess_concentration();
    const double var_h = unit_return_variance(s, market);
    if (excess == 0.0) throw DomainError("order parameters undefined at tau = m^2");
    if (var_h == 0.0) throw DomainError("order parameters undefined for zero return variance");
    OrderParameters p;
    p.theta = std::sqrt(var_h / excess);
    p.k = p.theta * market.budget - expected_unit_return(s, market);
    return p;
}

/// All closed-form quantities at once; theta and k are left at zero when undefined.
inline ReplicaResult evaluate_replica(const MomentSet& s, const MarketSpec& market) {
    ReplicaResult out;
    out.kappa_or = kappa_annealed(s, market);
    out.kappa = kappa_quenched(s, market);
    out.v_term = composite_variance(s, market);
    out.mean_h = expected_unit_return(s, market);
    out.var_h = unit_return_variance(s, market);
    if (market.excess_concentration() > 0.0 && out.var_h > 0.0) {
        const auto p = order_parameters(s, market);
        out.theta = p.theta;
        out.k = p.k;
    }
    return out;
}

enum class KappaKind { quenched, annealed };

inline const char* to_string(KappaKind kind) noexcept {
    return kind == KappaKind::quenched ? "quenched" : "annealed";
}

/// Budget-normalized kappa (m = 1, tau = tau').
inline double normalized_kappa(KappaKind kind, const MomentSet& s, double r, int T, double tau_norm) {
    const auto market = MarketSpec::normalized(r, T, tau_norm);
    return kind == KappaKind::quenched ? kappa_quenched(s, market) : kappa_annealed(s, market);
}

struct RateBracket {
    double lo = 1e-6;
    double hi = 1.0;
};

/// Internal interest rate: the r at which kappa (or kappa_OR) vanishes.
///
/// Both are strictly decreasing in r for non-negative moments, so the root is
/// unique once kappa(lo) > 0 and an upper point with kappa < 0 is found by
/// doubling up to r = 1e6. Bisection runs to the resolution of a double.
inline double internal_rate(KappaKind kind, const MomentSet& s, int T, double tau_norm,
                            std::optional<RateBracket> bracket_hint = std::nullopt) {
    constexpr double kMaxRate = 1e6;
    const RateBracket bracket = bracket_hint.value_or(RateBracket{});
    if (!(bracket.lo > 0.0) || !(bracket.hi > bracket.lo)) {
        throw DomainError("internal_rate: invalid bracket");
    }
    auto kappa = [&](double r) { return normalized_kappa(kind, s, r, T, tau_norm); };

    double lo = bracket.lo;
    if (!(kappa(lo) > 0.0)) {
        throw NoRootError(std::string("no positive ") + to_string(kind) + " kappa at r = " +
                          std::to_string(lo) + " for T = " + std::to_string(T));
    }
    double hi = std::min(bracket.hi, kMaxRate);
    while (kappa(hi) > 0.0) {
        if (hi >= kMaxRate) {
            throw NoRootError(std::string("no sign change of ") + to_string(kind) +
                              " kappa below r = 1e6 for T = " + std::to_string(T));
        }
        lo = hi;
        hi = std::min(hi * 2.0, kMaxRate);
    }
    for (int i = 0; i < 2000; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        if (kappa(mid) > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return std::abs(kappa(lo)) < std::abs(kappa(hi)) ? lo : hi;
}

enum class Region { a, b, c };

inline char to_char(Region region) noexcept {
    switch (region) {
    case Region::a: return 'a';
    case Region::b: return 'b';
    case Region::c: return 'c';
    }
    return '?';
}

/// (a) kappa > 0 and kappa_OR > 0, (b) kappa > 0 >= kappa_OR, (c) both <= 0.
/// Zero counts as non-positive.
inline Region classify_region(double r, int T, const MomentSet& s, double tau_norm) {
    const double q = normalized_kappa(KappaKind::quenched, s, r, T, tau_norm);
    const double o = normalized_kappa(KappaKind::annealed, s, r, T, tau_norm);
    if (q > 0.0 && o > 0.0) return Region::a;
    if (q > 0.0) return Region::b;
    if (o <= 0.0) return Region::c;
    throw InternalError("kappa <= 0 < kappa_OR at r = " + std::to_string(r) +
                        ", T = " + std::to_string(T));
}

} // namespace qnpv
