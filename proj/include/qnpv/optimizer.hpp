#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "qnpv/discounting.hpp"
#include "qnpv/errors.hpp"
#include "qnpv/npv.hpp"
#include "qnpv/summation.hpp"

namespace qnpv {

/// Realized unit returns with their population mean and variance (divisor N).
struct EmpiricalHStats {
    std::vector<double> h;
    double mean_h = 0.0;
    double var_h = 0.0;
};

/// Investment vector on the feasible set together with the multipliers of
/// L = H + k (sum w - N m) - theta/2 (sum w^2 - N tau).
///
/// theta and k are reported as (0, -mean h) whenever the concentration
/// constraint carries no information: a constant h, or tau == m^2 where the
/// feasible set is the single point w = m.
struct Allocation {
    std::vector<double> w;
    double k = 0.0;
    double theta = 0.0;
    bool binding = false;
    double objective = 0.0; // (1/N) sum_i w_i h_i
};

inline EmpiricalHStats h_stats(std::vector<double> h) {
    if (h.empty()) throw DimensionError("h_stats needs at least one value");
    for (double x : h) {
        if (!std::isfinite(x)) throw DomainError("h_stats: non-finite unit return");
    }
    const auto n = static_cast<double>(h.size());
    EmpiricalHStats s;
    if (std::all_of(h.begin(), h.end(), [&](double x) { return x == h.front(); })) {
        s.mean_h = h.front();
        s.var_h = 0.0;
    } else {
        s.mean_h = compensated_sum(h) / n;
        // corrected two-pass: the second sum removes the rounding error left in the mean
        CompensatedSum sq;
        CompensatedSum lin;
        for (double x : h) {
            const double d = x - s.mean_h;
            sq += d * d;
            lin += d;
        }
        const double l = lin.value();
        s.var_h = std::max(0.0, (sq.value() - l * l / n) / n);
    }
    s.h = std::move(h);
    return s;
}

inline EmpiricalHStats h_stats(std::span<const double> h) {
    return h_stats(std::vector<double>(h.begin(), h.end()));
}

/// (1/N) sum_i w_i h_i
inline double per_project_objective(std::span<const double> w, std::span<const double> h) {
    if (w.size() != h.size() || w.empty()) throw DimensionError("objective: length mismatch");
    return compensated_dot(w, h) / static_cast<double>(w.size());
}

/// |sum w - N m| / (N m)
inline double budget_residual(std::span<const double> w, const MarketSpec& market) {
    const double target = static_cast<double>(w.size()) * market.budget;
    return std::abs(compensated_sum(w) - target) / target;
}

/// (sum w^2 - N tau) / (N tau); positive means the ball constraint is violated.
inline double concentration_excess(std::span<const double> w, const MarketSpec& market) {
    const double cap = static_cast<double>(w.size()) * market.concentration;
    return (compensated_dot(w, w) - cap) / cap;
}

/// max_i |h_i - theta w_i + k|
inline double kkt_residual(const Allocation& a, std::span<const double> h) {
    if (a.w.size() != h.size()) throw DimensionError("kkt_residual: length mismatch");
    double worst = 0.0;
    for (std::size_t i = 0; i < h.size(); ++i) {
        worst = std::max(worst, std::abs(h[i] - a.theta * a.w[i] + a.k));
    }
    return worst;
}

/// Closed-form maximizer of sum_i h_i w_i over the feasible set:
/// w_i = (k + h_i)/theta = m + sqrt(tau - m^2) (h_i - <h>) / sqrt(Var h).
inline Allocation solve_allocation(const EmpiricalHStats& stats, const MarketSpec& market) {
    validate(market);
    const std::size_t n = stats.h.size();
    if (n == 0) throw DimensionError("solve_allocation: empty h");
    const double m = market.budget;
    const double spread = std::sqrt(market.excess_concentration());

    Allocation a;
    a.w.assign(n, m);
    a.theta = 0.0;
    a.k = -stats.mean_h;

    if (spread == 0.0) {
        a.binding = true;
        a.objective = per_project_objective(a.w, stats.h);
        return a;
    }
    if (stats.var_h == 0.0) {
        a.binding = false;
        a.objective = per_project_objective(a.w, stats.h);
        return a;
    }

    std::vector<double> d(n);
    CompensatedSum lin;
    for (std::size_t i = 0; i < n; ++i) {
        d[i] = stats.h[i] - stats.mean_h;
        lin += d[i];
    }
    const double shift = lin.value() / static_cast<double>(n);
    for (double& x : d) x -= shift;
    const double sd = std::sqrt(compensated_dot(d, d) / static_cast<double>(n));
    if (sd == 0.0) {
        a.binding = false;
        a.objective = per_project_objective(a.w, stats.h);
        return a;
    }

    for (std::size_t i = 0; i < n; ++i) a.w[i] = m + spread * (d[i] / sd);
    a.theta = std::sqrt(stats.var_h) / spread;
    a.k = a.theta * m - stats.mean_h;
    a.binding = true;
    a.objective = per_project_objective(a.w, stats.h);
    return a;
}

struct OracleOptions {
    int max_iterations = 100000;
    double kkt_tolerance = 1e-10;
    double multiplier_tolerance = 1e-12;
};

namespace detail {

// Euclidean projection of y onto { sum w = N m, |w|^2 <= N tau }.
// Stationarity gives w = (y + mu e)/(1 + rho); mu is fixed by the hyperplane
// and rho >= 0 is found by bisection on |w(rho)|^2 = N tau.
inline void project_feasible(std::span<const double> y, double m, double tau,
                             double multiplier_tolerance, std::span<double> out) {
    const std::size_t n = y.size();
    const double nd = static_cast<double>(n);
    const double sum_y = compensated_sum(y);
    const double cap = nd * tau;

    auto evaluate = [&](double rho, std::span<double> w) {
        const double mu = ((1.0 + rho) * nd * m - sum_y) / nd;
        CompensatedSum sq;
        for (std::size_t i = 0; i < n; ++i) {
            w[i] = (y[i] + mu) / (1.0 + rho);
            sq += w[i] * w[i];
        }
        return sq.value();
    };

    if (evaluate(0.0, out) <= cap) return;

    double lo = 0.0;
    double hi = 1.0;
    std::vector<double> scratch(n);
    while (evaluate(hi, scratch) > cap) {
        lo = hi;
        hi *= 2.0;
        if (!std::isfinite(hi)) throw InternalError("projection: ball multiplier diverged");
    }
    while (hi - lo > multiplier_tolerance * std::max(1.0, hi)) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        if (evaluate(mid, scratch) > cap) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    evaluate(hi, out);
}

// Least-squares multipliers for h = theta w - k e and the worst componentwise misfit.
inline double fit_multipliers(std::span<const double> h, std::span<const double> w, double& theta,
                              double& k) {
    const double nd = static_cast<double>(h.size());
    const double mean_h = compensated_sum(h) / nd;
    const double mean_w = compensated_sum(w) / nd;
    CompensatedSum cov;
    CompensatedSum var;
    for (std::size_t i = 0; i < h.size(); ++i) {
        cov += (h[i] - mean_h) * (w[i] - mean_w);
        var += (w[i] - mean_w) * (w[i] - mean_w);
    }
    theta = var.value() > 0.0 ? cov.value() / var.value() : 0.0;
    k = theta * mean_w - mean_h;
    double worst = 0.0;
    for (std::size_t i = 0; i < h.size(); ++i) {
        worst = std::max(worst, std::abs(h[i] - theta * w[i] + k));
    }
    return worst;
}

} // namespace detail

/// Numeric maximizer of sum_i h_i w_i over the feasible set by projected
/// gradient ascent, used to cross-check solve_allocation.
inline Allocation oracle_allocation(std::span<const double> h, const MarketSpec& market,
                                    const OracleOptions& options = {}) {
    validate(market);
    if (h.empty()) throw DimensionError("oracle_allocation: empty h");
    const std::size_t n = h.size();
    const double m = market.budget;
    const double tau = market.concentration;

    Allocation a;
    a.w.assign(n, m);
    if (market.excess_concentration() == 0.0) {
        a.binding = true;
        a.k = -compensated_sum(h) / static_cast<double>(n);
        a.objective = per_project_objective(a.w, h);
        return a;
    }

    const double h_norm = std::sqrt(compensated_dot(h, h));
    double theta = 0.0;
    double k = 0.0;
    double residual = detail::fit_multipliers(h, a.w, theta, k);
    if (h_norm == 0.0 || residual < options.kkt_tolerance) {
        a.binding = false;
        a.theta = 0.0;
        a.k = k;
        a.objective = per_project_objective(a.w, h);
        return a;
    }

    const double step = std::sqrt(static_cast<double>(n) * tau) / h_norm;
    std::vector<double> y(n);
    int iteration = 0;
    for (; iteration < options.max_iterations; ++iteration) {
        for (std::size_t i = 0; i < n; ++i) y[i] = a.w[i] + step * h[i];
        detail::project_feasible(y, m, tau, options.multiplier_tolerance, a.w);
        residual = detail::fit_multipliers(h, a.w, theta, k);
        // complementary slackness: theta > 0 only on the sphere
        const double slack = (static_cast<double>(n) * tau - compensated_dot(a.w, a.w)) / static_cast<double>(n);
        if (residual < options.kkt_tolerance && theta >= 0.0 &&
            theta * slack < options.kkt_tolerance) {
            break;
        }
    }
    if (iteration == options.max_iterations) {
        throw InternalError("oracle_allocation did not converge, KKT residual " +
                            std::to_string(residual));
    }
    a.theta = theta;
    a.k = k;
    a.binding = true;
    a.objective = per_project_objective(a.w, h);
    return a;
}

/// kappa_N = (1/N) max_{w in D} H(w|X) = m <h> + sqrt(tau - m^2) sqrt(Var h).
inline double max_npv_per_project(const EmpiricalHStats& stats, const MarketSpec& market) {
    validate(market);
    return market.budget * stats.mean_h +
           std::sqrt(market.excess_concentration()) * std::sqrt(stats.var_h);
}

inline double max_npv_per_project(const ProjectEnsemble& ensemble, const CashFlowMatrix& x,
                                  const MarketSpec& market, unsigned workers = 1) {
    validate(market);
    return max_npv_per_project(h_stats(realized_unit_returns(ensemble, x, market, workers)), market);
}

} // namespace qnpv
