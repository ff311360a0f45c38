#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "qnpv/discounting.hpp"
#include "qnpv/errors.hpp"
#include "qnpv/parallel.hpp"
#include "qnpv/summation.hpp"

namespace qnpv {

/// Per-project parameters: coupon rate c_i, attenuation rate lambda_i and
/// noise variance v_i. All three vectors have the same length N >= 1.
class ProjectEnsemble {
public:
    ProjectEnsemble(std::vector<double> coupon, std::vector<double> attenuation,
                    std::vector<double> variance)
        : c_(std::move(coupon)), lambda_(std::move(attenuation)), v_(std::move(variance)) {
        if (c_.empty()) throw DimensionError("ensemble needs at least one project");
        if (lambda_.size() != c_.size() || v_.size() != c_.size()) {
            throw DimensionError("ensemble vectors differ in length");
        }
        for (std::size_t i = 0; i < c_.size(); ++i) {
            if (!(c_[i] >= 0.0) || !(lambda_[i] >= 0.0) || !(v_[i] >= 0.0) ||
                !std::isfinite(c_[i]) || !std::isfinite(lambda_[i]) || !std::isfinite(v_[i])) {
                throw DomainError("project " + std::to_string(i) +
                                  ": c, lambda and v must be finite and non-negative");
            }
        }
    }

    /// N identical projects.
    static ProjectEnsemble uniform(std::size_t n, double c, double lambda, double v) {
        return {std::vector<double>(n, c), std::vector<double>(n, lambda), std::vector<double>(n, v)};
    }

    std::size_t size() const noexcept { return c_.size(); }
    std::span<const double> coupon() const noexcept { return c_; }
    std::span<const double> attenuation() const noexcept { return lambda_; }
    std::span<const double> variance() const noexcept { return v_; }

private:
    std::vector<double> c_;
    std::vector<double> lambda_;
    std::vector<double> v_;
};

/// Realized noise x_it, N rows by T columns, row-major.
class CashFlowMatrix {
public:
    CashFlowMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
        : rows_(rows), cols_(cols), data_(std::move(data)) {
        if (data_.size() != rows_ * cols_) throw DimensionError("noise matrix data size mismatch");
        for (double x : data_) {
            if (!std::isfinite(x)) throw DomainError("noise matrix entries must be finite");
        }
    }

    static CashFlowMatrix zeros(std::size_t rows, std::size_t cols) {
        return {rows, cols, std::vector<double>(rows * cols, 0.0)};
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::span<const double> row(std::size_t i) const noexcept {
        return std::span<const double>(data_).subspan(i * cols_, cols_);
    }
    std::span<const double> data() const noexcept { return data_; }

private:
    std::size_t rows_;
    std::size_t cols_;
    std::vector<double> data_;
};

namespace detail {

inline void check_row(std::span<const double> x_row, int T) {
    if (x_row.size() != static_cast<std::size_t>(T)) {
        throw DimensionError("noise row has " + std::to_string(x_row.size()) +
                             " periods, market maturity is " + std::to_string(T));
    }
}

inline void check_matrix(const ProjectEnsemble& ensemble, const CashFlowMatrix& x,
                         const MarketSpec& market) {
    if (x.rows() != ensemble.size()) {
        throw DimensionError("noise matrix has " + std::to_string(x.rows()) + " rows for " +
                             std::to_string(ensemble.size()) + " projects");
    }
    if (x.cols() != static_cast<std::size_t>(market.maturity)) {
        throw DimensionError("noise matrix has " + std::to_string(x.cols()) +
                             " columns, market maturity is " + std::to_string(market.maturity));
    }
}

// h for one project given a precomputed discount curve and terminal factor.
inline double unit_return(double c, double lambda, std::span<const double> x_row,
                          std::span<const double> curve, double terminal) noexcept {
    double coupons = 0.0;
    for (std::size_t t = 0; t < curve.size(); ++t) coupons += (1.0 + x_row[t]) * curve[t];
    return -1.0 + c * coupons + lambda * terminal;
}

} // namespace detail

/// h = -1 + c sum_t (1 + x_t)/(1+r)^t + lambda/(1+r)^T, the realized NPV per unit invested.
inline double realized_unit_return(double c, double lambda, std::span<const double> x_row,
                                   const MarketSpec& market) {
    detail::check_row(x_row, market.maturity);
    const auto curve = discount_curve(market.rate, market.maturity);
    return detail::unit_return(c, lambda, x_row, curve, terminal_discount(market.rate, market.maturity));
}

/// NPV of a single project with investment w. Exactly linear in w; w may be negative.
inline double npv_single(double w, double c, double lambda, std::span<const double> x_row,
                         const MarketSpec& market) {
    return w * realized_unit_return(c, lambda, x_row, market);
}

/// h_i for every project of the ensemble.
inline std::vector<double> realized_unit_returns(const ProjectEnsemble& ensemble,
                                                 const CashFlowMatrix& x, const MarketSpec& market,
                                                 unsigned workers = 1) {
    detail::check_matrix(ensemble, x, market);
    const auto curve = discount_curve(market.rate, market.maturity);
    const double terminal = terminal_discount(market.rate, market.maturity);
    const auto c = ensemble.coupon();
    const auto lambda = ensemble.attenuation();
    std::vector<double> h(ensemble.size());
    parallel_for(h.size(), workers, [&](std::size_t i) {
        h[i] = detail::unit_return(c[i], lambda[i], x.row(i), curve, terminal);
    });
    return h;
}

/// H(w|X) = sum_i NPV_i.
inline double total_npv(std::span<const double> w, const ProjectEnsemble& ensemble,
                        const CashFlowMatrix& x, const MarketSpec& market) {
    if (w.size() != ensemble.size()) {
        throw DimensionError("investment vector length does not match project count");
    }
    const auto h = realized_unit_returns(ensemble, x, market);
    return compensated_dot(w, h);
}

} // namespace qnpv
