#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <ostream>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "qnpv/csv.hpp"
#include "qnpv/discounting.hpp"
#include "qnpv/errors.hpp"
#include "qnpv/npv.hpp"
#include "qnpv/optimizer.hpp"
#include "qnpv/parallel.hpp"
#include "qnpv/replica.hpp"
#include "qnpv/sampling.hpp"

namespace qnpv {

// Experiment drivers. Each run_* function is a deterministic function of its
// config and writes a CSV preceded by `# key=value` lines holding the fully
// resolved configuration (the same syntax the CLI accepts as a config file).

using Metadata = std::vector<std::pair<std::string, std::string>>;

inline void write_metadata(std::ostream& os, const std::string& command, const Metadata& meta) {
    os << "# qnpv " << command << '\n';
    for (const auto& [key, value] : meta) os << "# " << key << '=' << value << '\n';
}

inline void add_distribution_metadata(Metadata& meta, const ParamDistributions& d) {
    meta.emplace_back("alpha", format_double(d.alpha));
    meta.emplace_back("beta", format_double(d.beta));
    meta.emplace_back("gamma", format_double(d.gamma));
    meta.emplace_back("v", format_double(d.v));
}

// ---------------------------------------------------------------- figure1

struct Figure1Config {
    ParamDistributions dist;
    double tau_norm = 3.0;
    int t_max = 30;
    unsigned workers = 1;
};

struct Figure1Row {
    int maturity = 0;
    double r_c = 0.0;
    double r_c_or = 0.0;
};

inline void validate(const Figure1Config& cfg) {
    validate(cfg.dist);
    if (cfg.t_max < 1) throw ConfigError("t-max must be at least 1");
    if (!(cfg.tau_norm >= 1.0)) throw ConfigError("tau-norm must be at least 1");
}

/// Internal rates r_c (quenched) and r_c^OR (annealed) for T = 1..t_max.
inline std::vector<Figure1Row> figure1_rows(const Figure1Config& cfg) {
    validate(cfg);
    const auto moments = analytic_moments(cfg.dist);
    std::vector<Figure1Row> rows(static_cast<std::size_t>(cfg.t_max));
    parallel_for(rows.size(), cfg.workers, [&](std::size_t j) {
        const int T = static_cast<int>(j) + 1;
        rows[j].maturity = T;
        rows[j].r_c = internal_rate(KappaKind::quenched, moments, T, cfg.tau_norm);
        rows[j].r_c_or = internal_rate(KappaKind::annealed, moments, T, cfg.tau_norm);
        if (!(rows[j].r_c > rows[j].r_c_or)) {
            throw InternalError("r_c <= r_c_or at T = " + std::to_string(T));
        }
    });
    return rows;
}

inline std::vector<Figure1Row> run_figure1(const Figure1Config& cfg, std::ostream& os) {
    auto rows = figure1_rows(cfg);
    Metadata meta;
    add_distribution_metadata(meta, cfg.dist);
    meta.emplace_back("tau-norm", format_double(cfg.tau_norm));
    meta.emplace_back("t-max", std::to_string(cfg.t_max));
    write_metadata(os, "figure1", meta);
    os << "T,r_c,r_c_or\n";
    for (const auto& row : rows) {
        os << row.maturity << ',' << format_double(row.r_c) << ',' << format_double(row.r_c_or) << '\n';
    }
    return rows;
}

// ----------------------------------------------------------------- region

struct RegionConfig {
    ParamDistributions dist;
    double tau_norm = 3.0;
    double r_min = 0.005;
    double r_max = 1.6;
    double r_step = 0.005;
    int t_max = 30;
    unsigned workers = 1;
};

struct RegionCell {
    int maturity = 0;
    double rate = 0.0;
    Region region = Region::a;
};

inline void validate(const RegionConfig& cfg) {
    validate(cfg.dist);
    if (!(cfg.r_min > 0.0)) throw ConfigError("r-min must be positive");
    if (!(cfg.r_max >= cfg.r_min)) throw ConfigError("r-max must not be below r-min");
    if (!(cfg.r_step > 0.0)) throw ConfigError("r-step must be positive");
    if (cfg.t_max < 1) throw ConfigError("t-max must be at least 1");
    if (!(cfg.tau_norm >= 1.0)) throw ConfigError("tau-norm must be at least 1");
}

/// Grid points r_j = r_min + j r_step up to r_max (inclusive within 1e-9 steps).
inline std::vector<double> rate_grid(double r_min, double r_max, double r_step) {
    const auto count = static_cast<std::size_t>(std::floor((r_max - r_min) / r_step + 1e-9)) + 1;
    std::vector<double> grid(count);
    for (std::size_t j = 0; j < count; ++j) grid[j] = r_min + static_cast<double>(j) * r_step;
    return grid;
}

inline std::vector<RegionCell> region_cells(const RegionConfig& cfg) {
    validate(cfg);
    const auto moments = analytic_moments(cfg.dist);
    const auto grid = rate_grid(cfg.r_min, cfg.r_max, cfg.r_step);
    std::vector<RegionCell> cells(grid.size() * static_cast<std::size_t>(cfg.t_max));
    parallel_for(cells.size(), cfg.workers, [&](std::size_t idx) {
        const int T = static_cast<int>(idx / grid.size()) + 1;
        const double r = grid[idx % grid.size()];
        cells[idx] = {T, r, classify_region(r, T, moments, cfg.tau_norm)};
    });
    return cells;
}

inline std::vector<RegionCell> run_region(const RegionConfig& cfg, std::ostream& os) {
    auto cells = region_cells(cfg);
    Metadata meta;
    add_distribution_metadata(meta, cfg.dist);
    meta.emplace_back("tau-norm", format_double(cfg.tau_norm));
    meta.emplace_back("r-min", format_double(cfg.r_min));
    meta.emplace_back("r-max", format_double(cfg.r_max));
    meta.emplace_back("r-step", format_double(cfg.r_step));
    meta.emplace_back("t-max", std::to_string(cfg.t_max));
    write_metadata(os, "region", meta);
    os << "T,r,region\n";
    for (const auto& cell : cells) {
        os << cell.maturity << ',' << format_double(cell.rate) << ',' << to_char(cell.region) << '\n';
    }
    return cells;
}

// --------------------------------------------------------------- converge

struct ConvergeConfig {
    ParamDistributions dist;
    double tau_norm = 3.0;
    double budget = 1.0;
    double rate = 0.1;
    int maturity = 10;
    std::vector<std::size_t> n_list{100, 1000, 10000, 100000};
    std::size_t seeds = 32;
    std::uint64_t seed = 1;
    unsigned workers = 1;
};

struct ConvergeRow {
    std::size_t n = 0;
    double mean_kappa = 0.0;
    double std_kappa = 0.0; // sample standard deviation over seeds
    double kappa_analytic = 0.0;
    std::vector<double> samples;
};

inline void validate(const ConvergeConfig& cfg) {
    validate(cfg.dist);
    if (cfg.n_list.empty()) throw ConfigError("n-list must not be empty");
    for (auto n : cfg.n_list) {
        if (n == 0) throw ConfigError("n-list entries must be positive");
    }
    if (cfg.seeds == 0) throw ConfigError("seeds must be positive");
    if (!(cfg.tau_norm >= 1.0)) throw ConfigError("tau-norm must be at least 1");
    validate(MarketSpec::normalized(cfg.rate, cfg.maturity, cfg.tau_norm, cfg.budget));
}

/// Seed of replicate `s` at size `n`; distinct sizes use unrelated streams.
inline Seed replicate_seed(std::uint64_t base, std::size_t n, std::size_t s) {
    return Seed{mix64(base * 0x9E3779B97F4A7C15ULL + n) + s};
}

/// kappa_N for one sampled world (ensemble and noise drawn from one seed).
inline double sampled_kappa(const ParamDistributions& dist, const MarketSpec& market, std::size_t n,
                            Seed seed, unsigned workers = 1) {
    const auto ensemble = sample_ensemble(dist, n, seed, workers);
    const auto x = sample_noise(ensemble, market.maturity, dist.noise, seed, workers);
    return max_npv_per_project(ensemble, x, market, workers);
}

/// Mean and sample standard deviation (divisor S - 1; zero for a single value).
inline std::pair<double, double> mean_and_std(const std::vector<double>& xs) {
    const double n = static_cast<double>(xs.size());
    const double mean = compensated_sum(xs) / n;
    if (xs.size() < 2) return {mean, 0.0};
    CompensatedSum sq;
    for (double x : xs) sq += (x - mean) * (x - mean);
    return {mean, std::sqrt(sq.value() / (n - 1.0))};
}

inline std::vector<ConvergeRow> converge_rows(const ConvergeConfig& cfg) {
    validate(cfg);
    const auto market = MarketSpec::normalized(cfg.rate, cfg.maturity, cfg.tau_norm, cfg.budget);
    const double analytic = kappa_quenched(analytic_moments(cfg.dist), market);
    std::vector<ConvergeRow> rows;
    for (auto n : cfg.n_list) {
        ConvergeRow row;
        row.n = n;
        row.kappa_analytic = analytic;
        row.samples.resize(cfg.seeds);
        parallel_for(cfg.seeds, cfg.workers, [&](std::size_t s) {
            row.samples[s] = sampled_kappa(cfg.dist, market, n, replicate_seed(cfg.seed, n, s));
        });
        std::tie(row.mean_kappa, row.std_kappa) = mean_and_std(row.samples);
        rows.push_back(std::move(row));
    }
    return rows;
}

inline std::vector<ConvergeRow> run_converge(const ConvergeConfig& cfg, std::ostream& os) {
    auto rows = converge_rows(cfg);
    Metadata meta;
    add_distribution_metadata(meta, cfg.dist);
    meta.emplace_back("noise", to_string(cfg.dist.noise));
    meta.emplace_back("tau-norm", format_double(cfg.tau_norm));
    meta.emplace_back("m", format_double(cfg.budget));
    meta.emplace_back("r", format_double(cfg.rate));
    meta.emplace_back("t-mat", std::to_string(cfg.maturity));
    std::string list;
    for (auto n : cfg.n_list) list += (list.empty() ? "" : ",") + std::to_string(n);
    meta.emplace_back("n-list", list);
    meta.emplace_back("seeds", std::to_string(cfg.seeds));
    meta.emplace_back("seed", std::to_string(cfg.seed));
    write_metadata(os, "converge", meta);
    os << "N,mean_kappa_N,std_kappa_N,kappa_analytic\n";
    for (const auto& row : rows) {
        os << row.n << ',' << format_double(row.mean_kappa) << ',' << format_double(row.std_kappa) << ','
           << format_double(row.kappa_analytic) << '\n';
    }
    return rows;
}

// --------------------------------------------------------------- allocate

struct AllocateConfig {
    std::optional<std::string> ensemble_path;
    ParamDistributions dist;
    std::size_t n = 20;
    std::uint64_t seed = 1;
    std::uint64_t noise_seed = 2;
    double rate = 0.1;
    int maturity = 10;
    double budget = 1.0;
    double tau_norm = 3.0;
    bool verify = false;
};

struct AllocateReport {
    ProjectEnsemble ensemble;
    EmpiricalHStats stats;
    Allocation allocation;
    double budget_residual = 0.0;
    double concentration_excess = 0.0;
    std::optional<double> oracle_objective;
    std::optional<double> oracle_gap;
};

/// Largest feasibility residual or oracle gap accepted by the allocate command.
inline constexpr double kAllocateTolerance = 1e-9;
inline constexpr double kOracleGapTolerance = 1e-8;

inline AllocateReport allocate(const AllocateConfig& cfg) {
    const auto market = MarketSpec::normalized(cfg.rate, cfg.maturity, cfg.tau_norm, cfg.budget);
    validate(market);
    auto ensemble = [&] {
        if (cfg.ensemble_path) {
            std::ifstream in(*cfg.ensemble_path);
            if (!in) throw ConfigError("cannot open ensemble file '" + *cfg.ensemble_path + "'");
            return read_ensemble_csv(in);
        }
        if (cfg.n == 0) throw ConfigError("n must be positive");
        return sample_ensemble(cfg.dist, cfg.n, Seed{cfg.seed});
    }();
    const auto x = sample_noise(ensemble, market.maturity, cfg.dist.noise, Seed{cfg.noise_seed});
    auto stats = h_stats(realized_unit_returns(ensemble, x, market));
    auto alloc = solve_allocation(stats, market);
    AllocateReport report{std::move(ensemble), std::move(stats), std::move(alloc), 0.0, 0.0, {}, {}};
    report.budget_residual = budget_residual(report.allocation.w, market);
    report.concentration_excess = concentration_excess(report.allocation.w, market);
    if (cfg.verify) {
        const auto oracle = oracle_allocation(report.stats.h, market);
        report.oracle_objective = oracle.objective;
        report.oracle_gap = std::abs(oracle.objective - report.allocation.objective);
    }
    return report;
}

/// True when every reported residual is within tolerance.
inline bool allocation_ok(const AllocateReport& r) {
    if (r.budget_residual > kAllocateTolerance) return false;
    if (r.concentration_excess > kAllocateTolerance) return false;
    if (r.oracle_gap && *r.oracle_gap > kOracleGapTolerance) return false;
    return true;
}

inline AllocateReport run_allocate(const AllocateConfig& cfg, std::ostream& os) {
    auto report = allocate(cfg);
    Metadata meta;
    if (cfg.ensemble_path) {
        meta.emplace_back("ensemble", *cfg.ensemble_path);
    } else {
        add_distribution_metadata(meta, cfg.dist);
        meta.emplace_back("n", std::to_string(cfg.n));
        meta.emplace_back("seed", std::to_string(cfg.seed));
    }
    meta.emplace_back("noise", to_string(cfg.dist.noise));
    meta.emplace_back("noise-seed", std::to_string(cfg.noise_seed));
    meta.emplace_back("r", format_double(cfg.rate));
    meta.emplace_back("t-mat", std::to_string(cfg.maturity));
    meta.emplace_back("m", format_double(cfg.budget));
    meta.emplace_back("tau-norm", format_double(cfg.tau_norm));
    write_metadata(os, "allocate", meta);

    os << "i,c,lambda,h,w\n";
    const auto c = report.ensemble.coupon();
    const auto l = report.ensemble.attenuation();
    for (std::size_t i = 0; i < report.ensemble.size(); ++i) {
        os << i << ',' << format_double(c[i]) << ',' << format_double(l[i]) << ','
           << format_double(report.stats.h[i]) << ',' << format_double(report.allocation.w[i]) << '\n';
    }
    const auto& a = report.allocation;
    os << "# k=" << format_double(a.k) << '\n'
       << "# theta=" << format_double(a.theta) << '\n'
       << "# binding=" << (a.binding ? "true" : "false") << '\n'
       << "# objective=" << format_double(a.objective) << '\n'
       << "# budget_residual=" << format_double(report.budget_residual) << '\n'
       << "# concentration_excess=" << format_double(report.concentration_excess) << '\n';
    if (report.oracle_objective) {
        os << "# oracle_objective=" << format_double(*report.oracle_objective) << '\n'
           << "# oracle_gap=" << format_double(*report.oracle_gap) << '\n';
    }
    return report;
}

} // namespace qnpv
