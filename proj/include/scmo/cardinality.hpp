#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <variant>
#include <vector>

#include "scmo/errors.hpp"
#include "scmo/gm_core.hpp"
#include "scmo/log_math.hpp"
#include "scmo/random.hpp"

namespace scmo {

// ---- Pochhammer symbol ------------------------------------------------------

/// Rising factorial (zeta)_n = zeta (zeta+1) ... (zeta+n-1) as sign and
/// log-magnitude. Short products are accumulated directly; long ones go
/// through log-gamma differences.
[[nodiscard]] inline SignedLog log_pochhammer(double zeta, std::size_t n) {
    if (n == 0) return {0.0, 1};
    if (n <= 30) {
        double acc = 0.0;
        int sign = 1;
        for (std::size_t i = 0; i < n; ++i) {
            const double f = zeta + static_cast<double>(i);
            if (f == 0.0) return {};
            if (f < 0.0) sign = -sign;
            acc += std::log(std::abs(f));
        }
        return {acc, sign};
    }
    const double nd = static_cast<double>(n);
    if (zeta > 0.0) return {detail::lgamma_pos(zeta + nd) - detail::lgamma_pos(zeta), 1};
    // Factors zeta .. zeta+k-1 are negative, the rest non-negative.
    const double kneg = std::min(nd, std::ceil(-zeta));
    if (zeta == std::floor(zeta) && -zeta < nd) return {}; // a factor is exactly zero
    double acc = 0.0;
    if (kneg > 0) acc += detail::lgamma_pos(1.0 - zeta) - detail::lgamma_pos(1.0 - zeta - kneg);
    if (kneg < nd) acc += detail::lgamma_pos(zeta + nd) - detail::lgamma_pos(zeta + kneg);
    const int sign = (static_cast<long long>(kneg) % 2 == 0) ? 1 : -1;
    return {acc, sign};
}

[[nodiscard]] inline double pochhammer(double zeta, std::size_t n) {
    if (n <= 30) {
        double p = 1.0;
        for (std::size_t i = 0; i < n; ++i) p *= zeta + static_cast<double>(i);
        return p;
    }
    return log_pochhammer(zeta, n).value();
}

// ---- Panjer parameterisation -------------------------------------------------

/// Relative tolerance on |variance - mean| under which a cardinality is
/// treated as Poisson.
inline constexpr double kPoissonEpsilon = 1e-9;

/// Panjer (alpha, beta). Negative-binomial for alpha, beta > 0, binomial for
/// alpha, beta < 0, Poisson when both are +inf.
struct PanjerParams {
    double alpha = std::numeric_limits<double>::infinity();
    double beta = std::numeric_limits<double>::infinity();
    double mean = 0.0;
    double variance = 0.0;

    [[nodiscard]] bool is_poisson() const { return std::isinf(alpha); }
    [[nodiscard]] bool is_binomial() const { return !is_poisson() && alpha < 0.0; }
};

[[nodiscard]] inline PanjerParams panjer_from_moments(double mean, double variance) {
    if (!(mean >= 0.0) || !(variance >= 0.0)) throw DegenerateParameterError("panjer_from_moments: negative moment");
    PanjerParams p;
    p.mean = mean;
    p.variance = variance;
    const double gap = variance - mean;
    if (std::abs(gap) <= kPoissonEpsilon * std::max(mean, 1.0)) return p;
    if (mean == 0.0) throw DegenerateParameterError("panjer_from_moments: zero mean with positive variance");
    p.alpha = mean * mean / gap;
    p.beta = mean / gap;
    return p;
}

// ---- Cardinality models ----------------------------------------------------

struct PoissonCardinality {
    double rate = 0.0;
};
struct PanjerCardinality {
    double alpha = 1.0;
    double beta = 1.0;
};
struct DiscreteCardinality {
    std::vector<double> rho;
};

using CardinalityModel = std::variant<PoissonCardinality, PanjerCardinality, DiscreteCardinality>;

/// Poisson for the Poisson branch, Panjer otherwise.
[[nodiscard]] inline CardinalityModel to_model(const PanjerParams& p) {
    if (p.is_poisson()) return PoissonCardinality{p.mean};
    return PanjerCardinality{p.alpha, p.beta};
}

[[nodiscard]] inline bool is_poisson(const CardinalityModel& m) {
    return std::holds_alternative<PoissonCardinality>(m);
}

[[nodiscard]] inline double cardinality_mean(const CardinalityModel& model) {
    return std::visit(
        [](const auto& m) -> double {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, PoissonCardinality>) return m.rate;
            else if constexpr (std::is_same_v<T, PanjerCardinality>) return m.alpha / m.beta;
            else {
                double s = 0.0;
                for (std::size_t n = 0; n < m.rho.size(); ++n) s += static_cast<double>(n) * m.rho[n];
                return s;
            }
        },
        model);
}

[[nodiscard]] inline double cardinality_variance(const CardinalityModel& model) {
    return std::visit(
        [](const auto& m) -> double {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, PoissonCardinality>) return m.rate;
            else if constexpr (std::is_same_v<T, PanjerCardinality>)
                return m.alpha / m.beta + m.alpha / (m.beta * m.beta);
            else {
                double s = 0.0, s2 = 0.0;
                for (std::size_t n = 0; n < m.rho.size(); ++n) {
                    s += static_cast<double>(n) * m.rho[n];
                    s2 += static_cast<double>(n * n) * m.rho[n];
                }
                return s2 - s * s;
            }
        },
        model);
}

namespace detail {

inline void check_panjer(const PanjerCardinality& m) {
    const bool negbin = m.alpha > 0.0 && m.beta > 0.0;
    const bool binom = m.alpha < 0.0 && m.beta <= -1.0;
    if (!negbin && !binom) throw DegenerateParameterError("Panjer parameters outside the binomial/negative-binomial range");
}

} // namespace detail

/// Signed log of pmf(n). The binomial branch with non-integer alpha can
/// produce negative coefficients, hence the sign.
[[nodiscard]] inline SignedLog log_cardinality_pmf(const CardinalityModel& model, std::size_t n) {
    return std::visit(
        [n](const auto& m) -> SignedLog {
            using T = std::decay_t<decltype(m)>;
            const double nd = static_cast<double>(n);
            if constexpr (std::is_same_v<T, PoissonCardinality>) {
                if (m.rate == 0.0) return n == 0 ? SignedLog{0.0, 1} : SignedLog{};
                return {-m.rate + nd * std::log(m.rate) - log_factorial(n), 1};
            } else if constexpr (std::is_same_v<T, PanjerCardinality>) {
                detail::check_panjer(m);
                if (m.beta == -1.0) {
                    // Zero variance: point mass at -alpha.
                    return std::abs(nd + m.alpha) < 1e-9 ? SignedLog{0.0, 1} : SignedLog{};
                }
                const SignedLog poch = log_pochhammer(m.alpha, n);
                if (poch.is_zero()) return {};
                const double b1 = m.beta + 1.0;
                const int sign = poch.sign * ((b1 < 0.0 && n % 2 == 1) ? -1 : 1);
                const double lg = poch.log_abs - log_factorial(n) - nd * std::log(std::abs(b1)) +
                                  m.alpha * std::log(m.beta / b1);
                return {lg, sign};
            } else {
                if (n >= m.rho.size() || m.rho[n] == 0.0) return {};
                return SignedLog::from(m.rho[n]);
            }
        },
        model);
}

[[nodiscard]] inline double cardinality_pmf(const CardinalityModel& model, std::size_t n) {
    return log_cardinality_pmf(model, n).value();
}

/// log(n! pmf(n)): the n-th factorial derivative of the probability
/// generating function at zero, used by the clutter terms of the updates.
[[nodiscard]] inline SignedLog log_factorial_pmf(const CardinalityModel& model, std::size_t n) {
    SignedLog p = log_cardinality_pmf(model, n);
    if (p.is_zero()) return p;
    p.log_abs += log_factorial(n);
    return p;
}

/// Cardinality distribution on {0, ..., n_max}.
struct CardinalityDist {
    std::vector<double> rho{1.0};

    [[nodiscard]] std::size_t n_max() const { return rho.size() - 1; }
    [[nodiscard]] double mean() const {
        double s = 0.0;
        for (std::size_t n = 0; n < rho.size(); ++n) s += static_cast<double>(n) * rho[n];
        return s;
    }
    [[nodiscard]] double variance() const {
        double s = 0.0, s2 = 0.0;
        for (std::size_t n = 0; n < rho.size(); ++n) {
            s += static_cast<double>(n) * rho[n];
            s2 += static_cast<double>(n) * static_cast<double>(n) * rho[n];
        }
        return s2 - s * s;
    }
    [[nodiscard]] double total() const {
        double s = 0.0;
        for (double r : rho) s += r;
        return s;
    }
    void normalize() {
        const double s = total();
        if (!(s > 0.0)) throw DegenerateLikelihoodError("cardinality distribution has zero mass");
        for (double& r : rho) r /= s;
    }
    [[nodiscard]] static CardinalityDist delta(std::size_t k, std::size_t n_max) {
        CardinalityDist d;
        d.rho.assign(n_max + 1, 0.0);
        d.rho.at(k) = 1.0;
        return d;
    }
};

struct Truncation {
    CardinalityDist dist;
    double lost_mass = 0.0;
    /// Set when more than 1e-6 probability mass lay beyond n_max.
    bool warning = false;
};

[[nodiscard]] inline Truncation truncate_to_dist(const CardinalityModel& model, std::size_t n_max) {
    Truncation t;
    t.dist.rho.assign(n_max + 1, 0.0);
    double head = 0.0;
    for (std::size_t n = 0; n <= n_max; ++n) {
        t.dist.rho[n] = std::max(0.0, cardinality_pmf(model, n));
        head += t.dist.rho[n];
    }
    const bool summable_tail = std::holds_alternative<PoissonCardinality>(model) ||
                               (std::holds_alternative<PanjerCardinality>(model) &&
                                std::get<PanjerCardinality>(model).alpha > 0.0);
    if (const auto* d = std::get_if<DiscreteCardinality>(&model)) {
        for (std::size_t n = n_max + 1; n < d->rho.size(); ++n) t.lost_mass += d->rho[n];
    } else if (summable_tail) {
        // Direct tail sum: 1 - head would lose everything below 1e-16.
        const double mean = cardinality_mean(model);
        double tail = 0.0;
        for (std::size_t n = n_max + 1; n < n_max + 2'000'000; ++n) {
            const double p = cardinality_pmf(model, n);
            tail += p;
            if (static_cast<double>(n) > mean && p <= 1e-40 + 1e-18 * tail) break;
        }
        t.lost_mass = tail;
    } else {
        t.lost_mass = std::max(0.0, 1.0 - head);
    }
    t.warning = t.lost_mass > 1e-6;
    t.dist.normalize();
    return t;
}

[[nodiscard]] inline std::size_t sample_cardinality(const CardinalityModel& model, Rng& rng) {
    if (const auto* p = std::get_if<PoissonCardinality>(&model)) {
        if (p->rate <= 0.0) return 0;
        return static_cast<std::size_t>(std::poisson_distribution<long long>(p->rate)(rng));
    }
    const double u = uniform01(rng);
    double acc = 0.0;
    std::size_t n = 0;
    for (; n < 10'000'000; ++n) {
        acc += std::max(0.0, cardinality_pmf(model, n));
        if (acc >= u) return n;
        if (const auto* d = std::get_if<DiscreteCardinality>(&model); d && n + 1 >= d->rho.size()) return n;
    }
    return n;
}

// ---- Elementary symmetric functions ---------------------------------------

/// e_0 .. e_n of the inputs by the recursive convolution
/// e_j <- e_j + v * e_{j-1}.
[[nodiscard]] inline std::vector<double> esf(std::span<const double> values) {
    std::vector<double> e(values.size() + 1, 0.0);
    e[0] = 1.0;
    for (std::size_t k = 0; k < values.size(); ++k)
        for (std::size_t j = k + 1; j >= 1; --j) e[j] += values[k] * e[j - 1];
    return e;
}

/// Elementary symmetric functions of values / exp(log_scale); the true
/// e_j is e[j] * exp(j * log_scale).
struct ScaledEsf {
    double log_scale = 0.0;
    std::vector<double> e{1.0};

    [[nodiscard]] double log_value(std::size_t j) const {
        if (j >= e.size() || e[j] <= 0.0) return kNegInf;
        return std::log(e[j]) + static_cast<double>(j) * log_scale;
    }
};

/// Scale that brings the largest value to one (zero when all are zero).
[[nodiscard]] inline double esf_log_scale(std::span<const double> values) {
    double mx = 0.0;
    for (double v : values) mx = std::max(mx, v);
    return mx > 0.0 ? std::log(mx) : 0.0;
}

/// Scaled ESF of `values`, optionally skipping up to two indices.
[[nodiscard]] inline ScaledEsf scaled_esf(std::span<const double> values, double log_scale,
                                          std::size_t skip_a = static_cast<std::size_t>(-1),
                                          std::size_t skip_b = static_cast<std::size_t>(-1)) {
    const double inv = std::exp(-log_scale);
    ScaledEsf out;
    out.log_scale = log_scale;
    out.e.assign(1, 1.0);
    out.e.reserve(values.size() + 1);
    for (std::size_t k = 0; k < values.size(); ++k) {
        if (k == skip_a || k == skip_b) continue;
        const double v = values[k] * inv;
        out.e.push_back(0.0);
        for (std::size_t j = out.e.size() - 1; j >= 1; --j) out.e[j] += v * out.e[j - 1];
    }
    return out;
}

// ---- Clutter -----------------------------------------------------------------

/// Clutter process: cardinality law plus a spatial density that is uniform
/// over an axis-aligned window. The density value 1/area is used for every
/// measurement, including ones that land outside the window after a
/// sensor offset.
template <int Nz>
struct ClutterModel {
    CardinalityModel cardinality = PoissonCardinality{0.0};
    Vec<Nz> lower;
    Vec<Nz> upper;

    [[nodiscard]] double area() const { return (upper - lower).prod(); }
    [[nodiscard]] double spatial_density(const Vec<Nz>& /*z*/) const { return 1.0 / area(); }
    [[nodiscard]] double rate() const { return cardinality_mean(cardinality); }
    [[nodiscard]] double intensity(const Vec<Nz>& z) const { return rate() * spatial_density(z); }
    [[nodiscard]] bool is_poisson() const { return scmo::is_poisson(cardinality); }
};

} // namespace scmo
