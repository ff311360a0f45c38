#pragma once

#include <algorithm>
#include <fstream>
#include <iostream>
#include <memory>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include <CLI11.hpp>

#include "qnpv/errors.hpp"
#include "qnpv/experiments.hpp"

namespace qnpv::cli {

enum ExitCode : int {
    kSuccess = 0,
    kConfigError = 2,
    kNoRoot = 3,
    kInternalError = 4,
};

/// Reads a flat `key = value` file. Blank lines and `#` comments are ignored.
inline std::vector<std::pair<std::string, std::string>> read_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::vector<std::pair<std::string, std::string>> entries;
    std::string line;
    std::size_t line_no = 0;
    auto trim = [](std::string_view s) {
        const auto b = s.find_first_not_of(" \t\r");
        if (b == std::string_view::npos) return std::string_view{};
        const auto e = s.find_last_not_of(" \t\r");
        return s.substr(b, e - b + 1);
    };
    while (std::getline(in, line)) {
        ++line_no;
        const auto body = trim(line);
        if (body.empty() || body.front() == '#') continue;
        const auto eq = body.find('=');
        if (eq == std::string_view::npos) {
            throw ConfigError(path + ":" + std::to_string(line_no) + ": expected key=value");
        }
        auto key = trim(body.substr(0, eq));
        const auto value = trim(body.substr(eq + 1));
        if (key.substr(0, 2) == "--") key.remove_prefix(2);
        if (key.empty()) throw ConfigError(path + ":" + std::to_string(line_no) + ": empty key");
        entries.emplace_back(std::string(key), std::string(value));
    }
    return entries;
}

namespace detail {

inline bool mentions_option(const std::vector<std::string>& args, const std::string& key) {
    const std::string flag = "--" + key;
    return std::any_of(args.begin(), args.end(), [&](const std::string& a) {
        return a == flag || a.rfind(flag + "=", 0) == 0;
    });
}

inline std::string find_config_path(const std::vector<std::string>& args) {
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) return args[i + 1];
        if (args[i].rfind("--config=", 0) == 0) return args[i].substr(9);
    }
    return {};
}

// Config-file entries become leading `--key=value` tokens, so anything given
// on the command line overrides them and unknown keys fail like unknown flags.
inline std::vector<std::string> merge_config(const std::vector<std::string>& args) {
    if (args.empty()) return args;
    const auto path = find_config_path(args);
    if (path.empty()) return args;
    std::vector<std::string> merged{args.front()};
    for (const auto& [key, value] : read_config_file(path)) {
        if (key == "config") throw ConfigError("config files cannot include other config files");
        if (!mentions_option(args, key)) merged.push_back("--" + key + "=" + value);
    }
    merged.insert(merged.end(), args.begin() + 1, args.end());
    return merged;
}

inline void add_distribution_options(CLI::App& cmd, ParamDistributions& d) {
    cmd.add_option("--alpha", d.alpha, "Beta shape alpha of coupon rates")->capture_default_str();
    cmd.add_option("--beta", d.beta, "Beta shape beta of coupon rates")->capture_default_str();
    cmd.add_option("--gamma", d.gamma, "Mean of exponential attenuation rates")->capture_default_str();
    cmd.add_option("--v", d.v, "Noise variance per project")->capture_default_str();
}

inline void add_noise_option(CLI::App& cmd, std::string& family) {
    cmd.add_option("--noise", family, "Noise family: gaussian, uniform or rademacher")
        ->capture_default_str();
}

} // namespace detail

/// Runs the command line `args` (without the program name). Output CSV goes to
/// `out` unless --out is given; diagnostics go to `err`. Returns the exit code.
inline int run(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Maximal net present value of stochastic cash-flow portfolios", "qnpv"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all");

    std::string out_path;
    std::string config_path;
    std::string noise = "gaussian";
    unsigned workers = 1;

    auto common = [&](CLI::App& cmd) {
        cmd.add_option("--out", out_path, "Write CSV to PATH instead of stdout");
        cmd.add_option("--config", config_path, "Flat key=value file of option defaults");
        cmd.add_option("--workers", workers, "Worker threads (0 = hardware concurrency)")
            ->capture_default_str();
    };

    Figure1Config fig;
    auto* figure1 = app.add_subcommand("figure1", "Internal rates r_c and r_c^OR versus maturity");
    common(*figure1);
    detail::add_distribution_options(*figure1, fig.dist);
    figure1->add_option("--tau-norm", fig.tau_norm, "Normalized concentration tau/m^2")->capture_default_str();
    figure1->add_option("--t-max", fig.t_max, "Largest maturity")->capture_default_str();

    RegionConfig reg;
    auto* region = app.add_subcommand("region", "Sign regions of kappa and kappa_OR over (T, r)");
    common(*region);
    detail::add_distribution_options(*region, reg.dist);
    region->add_option("--tau-norm", reg.tau_norm, "Normalized concentration tau/m^2")->capture_default_str();
    region->add_option("--r-min", reg.r_min, "Smallest rate on the grid")->capture_default_str();
    region->add_option("--r-max", reg.r_max, "Largest rate on the grid")->capture_default_str();
    region->add_option("--r-step", reg.r_step, "Rate grid step")->capture_default_str();
    region->add_option("--t-max", reg.t_max, "Largest maturity")->capture_default_str();

    ConvergeConfig conv;
    auto* converge = app.add_subcommand("converge", "Finite-N kappa_N against the analytic kappa");
    common(*converge);
    detail::add_distribution_options(*converge, conv.dist);
    detail::add_noise_option(*converge, noise);
    converge->add_option("--n-list", conv.n_list, "Comma-separated project counts")->delimiter(',');
    converge->add_option("--seeds", conv.seeds, "Replicates per N")->capture_default_str();
    converge->add_option("--seed", conv.seed, "Base seed")->capture_default_str();
    converge->add_option("--r", conv.rate, "Interest rate")->capture_default_str();
    converge->add_option("--t-mat", conv.maturity, "Maturity T")->capture_default_str();
    converge->add_option("--tau-norm", conv.tau_norm, "Normalized concentration tau/m^2")->capture_default_str();
    converge->add_option("--m", conv.budget, "Budget per project")->capture_default_str();

    AllocateConfig alloc;
    std::string ensemble_path;
    auto* allocate_cmd = app.add_subcommand("allocate", "Optimal allocation for one sampled world");
    common(*allocate_cmd);
    auto* ens_opt = allocate_cmd->add_option("--ensemble", ensemble_path, "Ensemble CSV (c,lambda,v)");
    auto* a_opt = allocate_cmd->add_option("--alpha", alloc.dist.alpha, "Beta shape alpha")->capture_default_str();
    auto* b_opt = allocate_cmd->add_option("--beta", alloc.dist.beta, "Beta shape beta")->capture_default_str();
    auto* g_opt = allocate_cmd->add_option("--gamma", alloc.dist.gamma, "Exponential mean")->capture_default_str();
    auto* n_opt = allocate_cmd->add_option("--n", alloc.n, "Number of projects")->capture_default_str();
    ens_opt->excludes(a_opt)->excludes(b_opt)->excludes(g_opt)->excludes(n_opt);
    allocate_cmd->add_option("--v", alloc.dist.v, "Noise variance for sampled ensembles")->capture_default_str();
    detail::add_noise_option(*allocate_cmd, noise);
    allocate_cmd->add_option("--seed", alloc.seed, "Ensemble seed")->capture_default_str();
    allocate_cmd->add_option("--noise-seed", alloc.noise_seed, "Noise seed")->capture_default_str();
    allocate_cmd->add_option("--r", alloc.rate, "Interest rate")->capture_default_str();
    allocate_cmd->add_option("--t-mat", alloc.maturity, "Maturity T")->capture_default_str();
    allocate_cmd->add_option("--m", alloc.budget, "Budget per project")->capture_default_str();
    allocate_cmd->add_option("--tau-norm", alloc.tau_norm, "Normalized concentration tau/m^2")->capture_default_str();
    allocate_cmd->add_flag("--verify", alloc.verify, "Cross-check against the numeric oracle");

    try {
        auto merged = detail::merge_config(args);
        std::reverse(merged.begin(), merged.end());
        app.parse(merged);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kSuccess : kConfigError;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kConfigError;
    }

    try {
        std::unique_ptr<std::ofstream> file;
        std::ostream* sink = &out;
        if (!out_path.empty()) {
            file = std::make_unique<std::ofstream>(out_path);
            if (!*file) throw ConfigError("cannot write '" + out_path + "'");
            sink = file.get();
        }

        if (figure1->parsed()) {
            fig.workers = workers;
            run_figure1(fig, *sink);
        } else if (region->parsed()) {
            reg.workers = workers;
            run_region(reg, *sink);
        } else if (converge->parsed()) {
            conv.dist.noise = parse_noise_family(noise);
            conv.workers = workers;
            run_converge(conv, *sink);
        } else if (allocate_cmd->parsed()) {
            alloc.dist.noise = parse_noise_family(noise);
            if (!ensemble_path.empty()) alloc.ensemble_path = ensemble_path;
            const auto report = run_allocate(alloc, *sink);
            if (!allocation_ok(report)) {
                err << "allocation residuals exceed tolerance\n";
                return kInternalError;
            }
        }
        sink->flush();
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const DomainError& e) {
        err << "invalid parameter: " << e.what() << '\n';
        return kConfigError;
    } catch (const DimensionError& e) {
        err << "invalid input: " << e.what() << '\n';
        return kConfigError;
    } catch (const NoRootError& e) {
        err << "no root: " << e.what() << '\n';
        return kNoRoot;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << '\n';
        return kInternalError;
    }
    return kSuccess;
}

} // namespace qnpv::cli
