#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "qnpv/optimizer.hpp"
#include "qnpv/sampling.hpp"

using namespace qnpv;

namespace {

void expect_feasible(const Allocation& a, const MarketSpec& m) {
    EXPECT_LT(budget_residual(a.w, m), 1e-9);
    EXPECT_LT(concentration_excess(a.w, m), 1e-9);
    if (a.binding) {
        EXPECT_LT(std::abs(concentration_excess(a.w, m)), 1e-9);
    }
    EXPECT_GE(a.theta, 0.0);
}

std::vector<double> random_h(std::mt19937_64& rng, std::size_t n) {
    std::normal_distribution<double> z(0.5, 1.3);
    std::vector<double> h(n);
    for (auto& x : h) x = z(rng);
    return h;
}

} // namespace

TEST(HStats, SmallExamples) {
    auto s = h_stats(std::vector<double>{1.0, 1.0, 1.0});
    EXPECT_EQ(s.mean_h, 1.0);
    EXPECT_EQ(s.var_h, 0.0);
    s = h_stats(std::vector<double>{0.0, 2.0});
    EXPECT_EQ(s.mean_h, 1.0);
    EXPECT_EQ(s.var_h, 1.0);
    EXPECT_THROW(h_stats(std::vector<double>{}), DimensionError);
    EXPECT_THROW(h_stats(std::vector<double>{1.0, std::nan("")}), DomainError);
}

TEST(HStats, MatchesTwoPassOracle) {
    std::mt19937_64 rng(1);
    const auto h = random_h(rng, 1000);
    const auto ref = qnpv::testing::two_pass(h);
    const auto s = h_stats(h);
    EXPECT_LT(qnpv::testing::rel_err(s.mean_h, ref.mean), 1e-12);
    EXPECT_LT(qnpv::testing::rel_err(s.var_h, ref.var), 1e-12);
    long double sq = 0.0L;
    for (double x : h) sq += static_cast<long double>(x) * x;
    const double raw = static_cast<double>(sq / h.size()) - s.mean_h * s.mean_h;
    EXPECT_LT(qnpv::testing::rel_err(s.var_h, raw), 1e-12);
}

TEST(SolveAllocation, SinglePointFeasibleSet) {
    const MarketSpec m{0.1, 5, 1.5, 2.25};
    const auto a = solve_allocation(h_stats(std::vector<double>{-0.2, 0.3, 1.0}), m);
    for (double w : a.w) EXPECT_EQ(w, 1.5);
    EXPECT_TRUE(a.binding);
    EXPECT_NEAR(a.objective, 1.5 * (1.1 / 3.0), 1e-15);
}

TEST(SolveAllocation, ConstantReturns) {
    const MarketSpec m{0.1, 5, 1.0, 3.0};
    const auto a = solve_allocation(h_stats(std::vector<double>(4, 0.7)), m);
    for (double w : a.w) EXPECT_EQ(w, 1.0);
    EXPECT_EQ(a.theta, 0.0);
    EXPECT_FALSE(a.binding);
    EXPECT_EQ(kkt_residual(a, std::vector<double>(4, 0.7)), 0.0);
}

TEST(SolveAllocation, ThreeProjectExample) {
    const MarketSpec m{0.1, 5, 1.0, 3.0};
    const std::vector<double> h{-0.1, 0.0, 0.4};
    const auto a = solve_allocation(h_stats(h), m);
    const auto o = oracle_allocation(h, m);
    EXPECT_NEAR(a.objective, o.objective, 1e-8);
    // mpmath
    EXPECT_NEAR(a.objective, 0.40550504633038933, 1e-14);
    EXPECT_NEAR(a.w[0], -0.30930734141595429, 1e-14);
    EXPECT_NEAR(a.w[1], 0.34534632929202286, 1e-14);
    EXPECT_NEAR(a.w[2], 2.9639610121239314, 1e-14);
    expect_feasible(a, m);
    EXPECT_LT(kkt_residual(a, h), 1e-12);
}

TEST(OracleAllocation, TwoProjectHandOptimum) {
    const MarketSpec m{0.1, 5, 1.0, 2.0};
    const std::vector<double> h{0.0, 1.0};
    const auto o = oracle_allocation(h, m);
    EXPECT_NEAR(o.w[0], 0.0, 1e-9);
    EXPECT_NEAR(o.w[1], 2.0, 1e-9);
    double w1 = 0.0;
    const double brute = qnpv::testing::brute_two_asset(0.0, 1.0, 1.0, 2.0, w1);
    EXPECT_NEAR(o.objective, brute, 1e-9);
    EXPECT_NEAR(solve_allocation(h_stats(h), m).objective, brute, 1e-9);
}

TEST(OracleAllocation, BruteForceTwoAssetGrid) {
    std::mt19937_64 rng(41);
    std::normal_distribution<double> z(0.0, 1.0);
    for (int k = 0; k < 20; ++k) {
        const std::vector<double> h{z(rng), z(rng)};
        const MarketSpec m{0.1, 3, 1.0, 1.0 + 4.0 * std::abs(z(rng))};
        double w1 = 0.0;
        const double brute = qnpv::testing::brute_two_asset(h[0], h[1], 1.0, m.concentration, w1);
        const auto o = oracle_allocation(h, m);
        EXPECT_NEAR(o.objective, brute, 1e-8);
        EXPECT_NEAR(o.w[0], w1, 1e-4);
    }
}

TEST(OracleAllocation, ConstantReturnsGiveUniformAllocation) {
    const MarketSpec m{0.1, 5, 2.0, 9.0};
    const auto o = oracle_allocation(std::vector<double>(6, -0.3), m);
    for (double w : o.w) EXPECT_EQ(w, 2.0);
    EXPECT_FALSE(o.binding);
}

TEST(OracleAllocation, AgreesWithClosedFormOnRandomInstances) {
    std::mt19937_64 rng(43);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int k = 0; k < 200; ++k) {
        const std::size_t n = 2 + rng() % 99;
        const auto h = random_h(rng, n);
        const MarketSpec m{0.1, 5, 0.2 + 3.0 * u(rng), 0.0};
        const MarketSpec market{m.rate, m.maturity, m.budget, m.budget * m.budget * (1.1 + 3.9 * u(rng))};
        const auto closed = solve_allocation(h_stats(h), market);
        const auto oracle = oracle_allocation(h, market);
        EXPECT_LT(std::abs(closed.objective - oracle.objective), 1e-8);
        EXPECT_LT(kkt_residual(closed, h), 1e-8);
        expect_feasible(closed, market);
        expect_feasible(oracle, market);
    }
}

TEST(OracleAllocation, IterationCapSignalsFailure) {
    OracleOptions opts;
    opts.max_iterations = 1;
    opts.kkt_tolerance = 1e-300;
    const std::vector<double> h{0.1, 0.5, -0.2, 0.9};
    EXPECT_THROW(oracle_allocation(h, MarketSpec{0.1, 5, 1.0, 3.0}, opts), InternalError);
}

TEST(SolveAllocation, BudgetScaling) {
    std::mt19937_64 rng(47);
    const auto h = random_h(rng, 50);
    const auto stats = h_stats(h);
    const MarketSpec base{0.1, 5, 1.3, 1.3 * 1.3 * 2.5};
    const auto a0 = solve_allocation(stats, base);
    for (double a : {0.5, 2.0, 10.0}) {
        const MarketSpec scaled{base.rate, base.maturity, a * base.budget, a * a * base.concentration};
        const auto a1 = solve_allocation(stats, scaled);
        EXPECT_NEAR(a1.objective / a0.objective, a, 4e-15 * a);
        for (std::size_t i = 0; i < h.size(); ++i) {
            EXPECT_NEAR(a1.w[i], a * a0.w[i], 8e-15 * a * std::max(1.0, std::abs(a0.w[i])));
        }
    }
}

TEST(SolveAllocation, ObjectiveNondecreasingInConcentration) {
    std::mt19937_64 rng(53);
    const auto stats = h_stats(random_h(rng, 30));
    double prev = -1e300;
    for (double tau = 1.0; tau < 10.0; tau += 0.25) {
        const double obj = solve_allocation(stats, MarketSpec{0.1, 5, 1.0, tau}).objective;
        EXPECT_GE(obj, prev - 1e-15);
        prev = obj;
    }
}

TEST(SolveAllocation, ClosedFormObjective) {
    std::mt19937_64 rng(59);
    for (int k = 0; k < 50; ++k) {
        const auto stats = h_stats(random_h(rng, 2 + rng() % 300));
        const MarketSpec m{0.1, 5, 1.7, 1.7 * 1.7 * 3.0};
        const auto a = solve_allocation(stats, m);
        EXPECT_NEAR(a.objective, max_npv_per_project(stats, m), 1e-12);
        for (std::size_t i = 0; i < a.w.size(); ++i) {
            EXPECT_NEAR(a.w[i], (a.k + stats.h[i]) / a.theta, 1e-12 * std::max(1.0, std::abs(a.w[i])));
        }
    }
}

TEST(MaxNpvPerProject, IdenticalProjectsZeroNoise) {
    const auto e = ProjectEnsemble::uniform(25, 0.2, 0.8, 0.0);
    const MarketSpec m{0.07, 8, 1.5, 1.5 * 1.5 * 3.0};
    const double got = max_npv_per_project(e, CashFlowMatrix::zeros(25, 8), m);
    EXPECT_NEAR(got, 1.5 * (-1.0 + unit_terminal_payoff(0.2, 0.8, 0.07, 8)), 1e-14);
}

TEST(MaxNpvPerProject, EndToEndAgainstOracle) {
    const ParamDistributions d;
    const auto e = sample_ensemble(d, 5, Seed{9});
    const auto x = sample_noise(e, 2, NoiseFamily::gaussian, Seed{10});
    const MarketSpec m{0.1, 2, 1.0, 3.0};
    const auto h = realized_unit_returns(e, x, m);
    const auto oracle = oracle_allocation(h, m);
    const double via_npv = total_npv(oracle.w, e, x, m) / 5.0;
    EXPECT_NEAR(max_npv_per_project(e, x, m), via_npv, 1e-9);
}
