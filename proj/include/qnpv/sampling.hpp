#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "qnpv/errors.hpp"
#include "qnpv/npv.hpp"
#include "qnpv/parallel.hpp"
#include "qnpv/replica.hpp"
#include "qnpv/summation.hpp"

namespace qnpv {

struct Seed {
    std::uint64_t value = 0;
};

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Counter-based generator: output n is mix64(key + n * golden). The key is
/// derived from (seed, domain, i, t), so every stream can be generated
/// independently of scheduling order.
class CounterRng {
public:
    using result_type = std::uint64_t;

    explicit constexpr CounterRng(std::uint64_t key) noexcept : state_(key) {}

    static constexpr CounterRng for_stream(Seed seed, std::uint64_t domain, std::uint64_t i,
                                           std::uint64_t t = 0) noexcept {
        std::uint64_t k = mix64(seed.value + kGolden * (domain + 1));
        k = mix64(k ^ (i * 0xD1B54A32D192ED03ULL + 0x8CB92BA72F3D8DD7ULL));
        k = mix64(k ^ (t * 0xABC98388FB8FAC03ULL + 0x5851F42D4C957F2DULL));
        return CounterRng(k);
    }

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    constexpr result_type operator()() noexcept {
        state_ += kGolden;
        return mix64(state_);
    }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

private:
    static constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
    std::uint64_t state_;
};

enum class NoiseFamily { gaussian, uniform, rademacher };

inline NoiseFamily parse_noise_family(std::string_view name) {
    if (name == "gaussian" || name == "normal") return NoiseFamily::gaussian;
    if (name == "uniform") return NoiseFamily::uniform;
    if (name == "rademacher" || name == "rademacher-scaled") return NoiseFamily::rademacher;
    throw ConfigError("unknown noise family '" + std::string(name) +
                      "' (expected gaussian, uniform or rademacher)");
}

inline const char* to_string(NoiseFamily family) noexcept {
    switch (family) {
    case NoiseFamily::gaussian: return "gaussian";
    case NoiseFamily::uniform: return "uniform";
    case NoiseFamily::rademacher: return "rademacher";
    }
    return "?";
}

/// c ~ Beta(alpha, beta), lambda ~ Exponential(mean gamma), v fixed; noise with
/// mean 0 and variance v drawn from `noise`.
struct ParamDistributions {
    double alpha = 2.0;
    double beta = 5.0;
    double gamma = 0.9;
    double v = 1.0;
    NoiseFamily noise = NoiseFamily::gaussian;
};

inline void validate(const ParamDistributions& d) {
    if (!(d.alpha > 0.0) || !(d.beta > 0.0) || !std::isfinite(d.alpha) || !std::isfinite(d.beta)) {
        throw DomainError("beta shape parameters must be positive");
    }
    if (!(d.gamma > 0.0) || !std::isfinite(d.gamma)) {
        throw DomainError("exponential mean gamma must be positive");
    }
    if (!(d.v >= 0.0) || !std::isfinite(d.v)) throw DomainError("noise variance v must be non-negative");
}

/// Moments of independent Beta(alpha, beta) coupons and Exponential(gamma) attenuations.
inline MomentSet analytic_moments(const ParamDistributions& d) {
    validate(d);
    const double ab = d.alpha + d.beta;
    const double mean_c = d.alpha / ab;
    const double mean_c2 = d.alpha * (d.alpha + 1.0) / (ab * (ab + 1.0));
    MomentSet s;
    s.mean_c = mean_c;
    s.mean_lambda = d.gamma;
    s.mean_c2v = d.v * mean_c2;
    s.var_c = d.alpha * d.beta / (ab * ab * (ab + 1.0));
    s.var_lambda = d.gamma * d.gamma;
    s.cov_c_lambda = 0.0;
    return s;
}

/// Population moments of a concrete ensemble.
inline MomentSet empirical_moments(const ProjectEnsemble& e) {
    const auto c = e.coupon();
    const auto l = e.attenuation();
    const auto v = e.variance();
    const double n = static_cast<double>(e.size());
    CompensatedSum sc, sl;
    for (std::size_t i = 0; i < e.size(); ++i) {
        sc += c[i];
        sl += l[i];
    }
    MomentSet s;
    s.mean_c = sc.value() / n;
    s.mean_lambda = sl.value() / n;
    CompensatedSum c2v, vc, vl, cov;
    for (std::size_t i = 0; i < e.size(); ++i) {
        const double dc = c[i] - s.mean_c;
        const double dl = l[i] - s.mean_lambda;
        c2v += c[i] * c[i] * v[i];
        vc += dc * dc;
        vl += dl * dl;
        cov += dc * dl;
    }
    s.mean_c2v = c2v.value() / n;
    s.var_c = vc.value() / n;
    s.var_lambda = vl.value() / n;
    s.cov_c_lambda = cov.value() / n;
    return s;
}

namespace detail {

enum StreamDomain : std::uint64_t { kCouponStream = 1, kAttenuationStream = 2, kNoiseStream = 3 };

inline double draw_beta(CounterRng& rng, double alpha, double beta) {
    std::gamma_distribution<double> ga(alpha, 1.0);
    std::gamma_distribution<double> gb(beta, 1.0);
    const double x = ga(rng);
    const double y = gb(rng);
    return x / (x + y);
}

inline double draw_exponential(CounterRng& rng, double mean) {
    return -mean * std::log1p(-rng.uniform());
}

inline double draw_noise(CounterRng& rng, NoiseFamily family, double sd) {
    switch (family) {
    case NoiseFamily::gaussian: {
        std::normal_distribution<double> z(0.0, 1.0);
        return sd * z(rng);
    }
    case NoiseFamily::uniform:
        return sd * std::sqrt(3.0) * (2.0 * rng.uniform() - 1.0);
    case NoiseFamily::rademacher:
        return (rng() >> 63) != 0 ? sd : -sd;
    }
    throw ConfigError("unknown noise family");
}

} // namespace detail

/// N i.i.d. projects; bit-identical for equal (dist, n, seed) regardless of workers.
inline ProjectEnsemble sample_ensemble(const ParamDistributions& dist, std::size_t n, Seed seed,
                                       unsigned workers = 1) {
    validate(dist);
    if (n == 0) throw DomainError("sample_ensemble: n must be at least 1");
    std::vector<double> c(n), lambda(n);
    parallel_for(n, workers, [&](std::size_t i) {
        auto rc = CounterRng::for_stream(seed, detail::kCouponStream, i);
        c[i] = detail::draw_beta(rc, dist.alpha, dist.beta);
        auto rl = CounterRng::for_stream(seed, detail::kAttenuationStream, i);
        lambda[i] = detail::draw_exponential(rl, dist.gamma);
    });
    return ProjectEnsemble(std::move(c), std::move(lambda), std::vector<double>(n, dist.v));
}

/// x_it with mean 0 and variance v_i; one generator stream per (i, t).
inline CashFlowMatrix sample_noise(const ProjectEnsemble& ensemble, int T, NoiseFamily family,
                                   Seed seed, unsigned workers = 1) {
    if (T < 1) throw DomainError("sample_noise: T must be at least 1");
    const std::size_t n = ensemble.size();
    const auto cols = static_cast<std::size_t>(T);
    std::vector<double> x(n * cols);
    const auto v = ensemble.variance();
    parallel_for(n, workers, [&](std::size_t i) {
        const double sd = std::sqrt(v[i]);
        for (std::size_t t = 0; t < cols; ++t) {
            if (sd == 0.0) {
                x[i * cols + t] = 0.0;
                continue;
            }
            auto rng = CounterRng::for_stream(seed, detail::kNoiseStream, i, t);
            x[i * cols + t] = detail::draw_noise(rng, family, sd);
        }
    });
    return CashFlowMatrix(n, cols, std::move(x));
}

} // namespace qnpv
