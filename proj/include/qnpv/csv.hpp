#pragma once

#include <charconv>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "qnpv/errors.hpp"
#include "qnpv/npv.hpp"

namespace qnpv {

/// Shortest decimal text that parses back to the same double.
inline std::string format_double(double x) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view text) {
    while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
    while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r')) {
        text.remove_suffix(1);
    }
    double x = 0.0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), x);
    if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) {
        throw ConfigError("not a number: '" + std::string(text) + "'");
    }
    return x;
}

inline std::vector<std::string_view> split_fields(std::string_view line, char sep = ',') {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const auto pos = line.find(sep, start);
        out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

/// Ensemble CSV: header `c,lambda,v`, one project per row.
inline void write_ensemble_csv(std::ostream& os, const ProjectEnsemble& e) {
    os << "c,lambda,v\n";
    const auto c = e.coupon();
    const auto l = e.attenuation();
    const auto v = e.variance();
    for (std::size_t i = 0; i < e.size(); ++i) {
        os << format_double(c[i]) << ',' << format_double(l[i]) << ',' << format_double(v[i]) << '\n';
    }
}

/// Reads the format written by write_ensemble_csv. Blank lines and lines
/// starting with '#' are skipped. Errors carry the 1-based line number.
inline ProjectEnsemble read_ensemble_csv(std::istream& is) {
    std::vector<double> c, lambda, v;
    std::string line;
    std::size_t line_no = 0;
    bool header_seen = false;
    while (std::getline(is, line)) {
        ++line_no;
        std::string_view view(line);
        if (!view.empty() && view.back() == '\r') view.remove_suffix(1);
        if (view.empty() || view.front() == '#') continue;
        const auto fields = split_fields(view);
        if (!header_seen) {
            if (view != "c,lambda,v") {
                throw ConfigError("ensemble line " + std::to_string(line_no) +
                                  ": expected header 'c,lambda,v'");
            }
            header_seen = true;
            continue;
        }
        if (fields.size() != 3) {
            throw ConfigError("ensemble line " + std::to_string(line_no) + ": expected 3 fields, got " +
                              std::to_string(fields.size()));
        }
        try {
            const double ci = parse_double(fields[0]);
            const double li = parse_double(fields[1]);
            const double vi = parse_double(fields[2]);
            if (!(ci >= 0.0) || !(li >= 0.0) || !(vi >= 0.0) || !std::isfinite(ci) ||
                !std::isfinite(li) || !std::isfinite(vi)) {
                throw ConfigError("values must be finite and non-negative");
            }
            c.push_back(ci);
            lambda.push_back(li);
            v.push_back(vi);
        } catch (const ConfigError& err) {
            throw ConfigError("ensemble line " + std::to_string(line_no) + ": " + err.what());
        }
    }
    if (!header_seen) throw ConfigError("ensemble file is empty");
    if (c.empty()) throw ConfigError("ensemble file has no projects");
    return ProjectEnsemble(std::move(c), std::move(lambda), std::move(v));
}

} // namespace qnpv
