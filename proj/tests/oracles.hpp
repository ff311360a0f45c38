#pragma once

// Independent reference computations used only by the tests. Nothing here
// calls into the library's numeric paths.

#include <cmath>
#include <cstddef>
#include <functional>
#include <random>
#include <vector>

namespace qnpv::testing {

inline double direct_annuity(double r, int T) {
    long double s = 0.0L;
    for (int t = 1; t <= T; ++t) s += 1.0L / std::pow(1.0L + r, t);
    return static_cast<double>(s);
}

inline double direct_squared_annuity(double r, int T) {
    long double s = 0.0L;
    for (int t = 1; t <= T; ++t) s += 1.0L / std::pow(1.0L + r, 2 * t);
    return static_cast<double>(s);
}

// NPV by literal re-summation of the cash flows.
inline double brute_npv(double w, double c, double lambda, const std::vector<double>& x, double r) {
    const int T = static_cast<int>(x.size());
    long double v = -w;
    for (int t = 1; t <= T; ++t) {
        v += (static_cast<long double>(c) * w + static_cast<long double>(c) * w * x[t - 1]) /
             std::pow(1.0L + r, t);
    }
    v += lambda * static_cast<long double>(w) / std::pow(1.0L + r, T);
    return static_cast<double>(v);
}

// Double loop over projects and periods.
inline double brute_total_npv(const std::vector<double>& w, const std::vector<double>& c,
                              const std::vector<double>& lambda,
                              const std::vector<std::vector<double>>& x, double r) {
    long double total = 0.0L;
    for (std::size_t i = 0; i < w.size(); ++i) {
        long double npv = -static_cast<long double>(w[i]);
        for (std::size_t t = 0; t < x[i].size(); ++t) {
            npv += c[i] * w[i] * (1.0L + x[i][t]) / std::pow(1.0L + r, static_cast<int>(t) + 1);
        }
        npv += lambda[i] * w[i] / std::pow(1.0L + r, static_cast<int>(x[i].size()));
        total += npv;
    }
    return static_cast<double>(total);
}

struct TwoPass {
    double mean;
    double var;
};

inline TwoPass two_pass(const std::vector<double>& xs) {
    long double s = 0.0L;
    for (double x : xs) s += x;
    const long double mean = s / xs.size();
    long double q = 0.0L;
    for (double x : xs) q += (x - mean) * (x - mean);
    return {static_cast<double>(mean), static_cast<double>(q / xs.size())};
}

// Composite Simpson rule on [a, b] with n (even) panels.
inline double simpson(const std::function<double(double)>& f, double a, double b, int n) {
    const double h = (b - a) / n;
    double s = f(a) + f(b);
    for (int i = 1; i < n; ++i) s += f(a + i * h) * (i % 2 == 1 ? 4.0 : 2.0);
    return s * h / 3.0;
}

// max h1 w1 + h2 w2 on w1 + w2 = 2m, w1^2 + w2^2 <= 2 tau by scanning the
// feasible segment w1 in [m - s, m + s], s = sqrt(tau - m^2).
inline double brute_two_asset(double h1, double h2, double m, double tau, double& w1_best) {
    const double s = std::sqrt(tau - m * m);
    double best = -1e300;
    const int steps = 200000;
    for (int j = 0; j <= steps; ++j) {
        const double w1 = m - s + 2.0 * s * j / steps;
        const double val = h1 * w1 + h2 * (2.0 * m - w1);
        if (val > best) {
            best = val;
            w1_best = w1;
        }
    }
    return best / 2.0;
}

inline double rel_err(double a, double b) {
    return std::abs(a - b) / std::max(std::abs(b), 1e-300);
}

} // namespace qnpv::testing
