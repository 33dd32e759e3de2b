#pragma once

// Brute-force reference computations. Nothing here uses the elementary
// symmetric functions, the Panjer algebra or the filters' association
// tables; every quantity is enumerated from the generative model in long
// double with compensated summation.

#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "scmo/cardinality.hpp"
#include "scmo/errors.hpp"
#include "scmo/gm_core.hpp"
#include "scmo/models.hpp"
#include "scmo/random.hpp"

namespace scmo::oracle {

inline constexpr std::size_t kMaxMeasurements = 10;
inline constexpr std::size_t kMaxComponents = 3;
inline constexpr std::size_t kMaxDiscreteSupport = 13;

/// Neumaier-compensated long double accumulator.
class KahanSum {
public:
    void add(long double x) {
        const long double t = sum_ + x;
        if (std::fabs(sum_) >= std::fabs(x)) c_ += (sum_ - t) + x;
        else c_ += (x - t) + sum_;
        sum_ = t;
    }
    [[nodiscard]] long double value() const { return sum_ + c_; }

private:
    long double sum_ = 0.0L;
    long double c_ = 0.0L;
};

/// pmf values 0, 1, ... of a cardinality law by its own recursion, until the
/// remaining tail is negligible (Poisson, negative binomial), the support
/// ends (binomial, discrete) or `cap` entries are produced.
[[nodiscard]] inline std::vector<long double> pmf_table(const CardinalityModel& model, std::size_t cap = 20000) {
    std::vector<long double> p;
    if (const auto* d = std::get_if<DiscreteCardinality>(&model)) {
        for (double r : d->rho) p.push_back(r);
        return p;
    }
    long double mean = 0.0L;
    if (const auto* po = std::get_if<PoissonCardinality>(&model)) {
        const long double lam = po->rate;
        mean = lam;
        p.push_back(std::exp(-lam));
        for (std::size_t n = 1; n < cap; ++n) {
            p.push_back(p.back() * lam / static_cast<long double>(n));
            if (static_cast<long double>(n) > mean && p.back() < 1e-40L) break;
        }
        return p;
    }
    const auto& pj = std::get<PanjerCardinality>(model);
    const long double a = pj.alpha, b = pj.beta;
    if (b == -1.0L) {
        const auto k = static_cast<std::size_t>(std::llround(static_cast<double>(-a)));
        p.assign(k + 1, 0.0L);
        p[k] = 1.0L;
        return p;
    }
    mean = a / b;
    p.push_back(std::pow(b / (b + 1.0L), a));
    for (std::size_t n = 1; n < cap; ++n) {
        const long double f = (a + static_cast<long double>(n) - 1.0L) / (static_cast<long double>(n) * (b + 1.0L));
        p.push_back(p.back() * f);
        if (p.back() == 0.0L) break; // binomial support ended
        if (static_cast<long double>(n) > mean && std::fabs(p.back()) < 1e-40L) break;
    }
    return p;
}

/// One enumeration problem: an i.i.d. cluster with cardinality law `prior`
/// and normalised spatial law `spatial`, observed through `obs` at sensor
/// state `s` with clutter `clutter`.
template <int Nx, int Nz>
struct Instance {
    CardinalityModel prior = PoissonCardinality{1.0};
    GaussianMixture<Nx> spatial;
    ObservationModel<Nx, Nz> obs;
    ClutterModel<Nz> clutter;
    MeasurementSet<Nz> Z;
    SensorState s;

    void check() const {
        if (Z.size() > kMaxMeasurements) throw CapacityError("oracle: too many measurements");
        if (spatial.size() > kMaxComponents) throw CapacityError("oracle: too many mixture components");
        if (const auto* d = std::get_if<DiscreteCardinality>(&prior); d && d->rho.size() > kMaxDiscreteSupport)
            throw CapacityError("oracle: discrete prior support beyond 12");
        if (std::abs(spatial.mass() - 1.0) > 1e-12) throw ConfigError("oracle: spatial law must be normalised");
    }
};

namespace detail {

/// p_d * integral l(z | x, s) s(dx), evaluated with an explicit inverse and
/// determinant in long double.
template <int Nx, int Nz>
[[nodiscard]] long double detection_integral(const Instance<Nx, Nz>& inst, const Vec<Nz>& z) {
    using LM = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
    using LV = Eigen::Matrix<long double, Eigen::Dynamic, 1>;
    const LM H = inst.obs.H.template cast<long double>();
    const LM R = inst.obs.R.template cast<long double>();
    const LV zs = (z - inst.obs.offset(inst.s)).template cast<long double>();
    KahanSum acc;
    for (const auto& c : inst.spatial.components) {
        const LM S = H * c.cov.template cast<long double>() * H.transpose() + R;
        const LV d = zs - H * c.mean.template cast<long double>();
        const long double q = d.dot(S.inverse() * d);
        const long double det = S.determinant();
        const long double norm = std::pow(2.0L * 3.14159265358979323846264338327950288L, -0.5L * H.rows()) /
                                 std::sqrt(det);
        acc.add(static_cast<long double>(c.weight) * norm * std::exp(-0.5L * q));
    }
    return static_cast<long double>(inst.obs.p_d) * acc.value();
}

inline std::size_t popcount(unsigned x) { return static_cast<std::size_t>(__builtin_popcount(x)); }

} // namespace detail

/// Per-cardinality likelihood terms f(Z | n) for n = 0 .. pmf.size()-1.
template <int Nx, int Nz>
[[nodiscard]] std::vector<long double> conditional_likelihoods(const Instance<Nx, Nz>& inst,
                                                               std::size_t n_count) {
    inst.check();
    const std::size_t m = inst.Z.size();
    std::vector<long double> g(m), sc(m);
    for (std::size_t j = 0; j < m; ++j) {
        g[j] = detail::detection_integral(inst, inst.Z[j]);
        sc[j] = inst.clutter.spatial_density(inst.Z[j]);
    }
    const auto clutter_pmf = pmf_table(inst.clutter.cardinality, m + 1);
    std::vector<long double> clutter_fact(m + 1, 0.0L);
    for (std::size_t k = 0; k <= m && k < clutter_pmf.size(); ++k) {
        long double f = clutter_pmf[k];
        for (std::size_t i = 2; i <= k; ++i) f *= static_cast<long double>(i);
        clutter_fact[k] = f;
    }
    const long double miss = 1.0L - static_cast<long double>(inst.obs.p_d);

    // For every subset Z' (detected) the product of g over Z' and of s_c over
    // the rest, times (m-j)! rho_c(m-j).
    std::vector<KahanSum> by_j(m + 1);
    for (unsigned mask = 0; mask < (1u << m); ++mask) {
        long double prod = clutter_fact[m - detail::popcount(mask)];
        for (std::size_t j = 0; j < m; ++j) prod *= (mask >> j & 1u) ? g[j] : sc[j];
        by_j[detail::popcount(mask)].add(prod);
    }
    std::vector<long double> out(n_count, 0.0L);
    for (std::size_t n = 0; n < n_count; ++n) {
        KahanSum acc;
        long double falling = 1.0L; // n! / (n-j)!
        for (std::size_t j = 0; j <= std::min(n, m); ++j) {
            if (j > 0) falling *= static_cast<long double>(n - j + 1);
            const long double mp = (n - j == 0) ? 1.0L : std::pow(miss, static_cast<long double>(n - j));
            acc.add(falling * mp * by_j[j].value());
        }
        out[n] = acc.value();
    }
    return out;
}

/// Multi-object likelihood  sum_n rho(n) f(Z | n).
template <int Nx, int Nz>
[[nodiscard]] long double likelihood(const Instance<Nx, Nz>& inst) {
    const auto p = pmf_table(inst.prior);
    const auto f = conditional_likelihoods(inst, p.size());
    KahanSum acc;
    for (std::size_t n = 0; n < p.size(); ++n) acc.add(p[n] * f[n]);
    return acc.value();
}

struct PosteriorCardinality {
    std::vector<long double> pmf;
    long double mean = 0.0L;
    long double variance = 0.0L;
};

template <int Nx, int Nz>
[[nodiscard]] PosteriorCardinality posterior_cardinality(const Instance<Nx, Nz>& inst) {
    const auto p = pmf_table(inst.prior);
    const auto f = conditional_likelihoods(inst, p.size());
    PosteriorCardinality out;
    out.pmf.resize(p.size());
    KahanSum tot;
    for (std::size_t n = 0; n < p.size(); ++n) {
        out.pmf[n] = p[n] * f[n];
        tot.add(out.pmf[n]);
    }
    const long double z = tot.value();
    if (!(z > 0.0L)) throw DegenerateLikelihoodError("oracle: zero likelihood");
    KahanSum m1, m2;
    for (std::size_t n = 0; n < p.size(); ++n) {
        out.pmf[n] /= z;
        m1.add(static_cast<long double>(n) * out.pmf[n]);
        m2.add(static_cast<long double>(n) * static_cast<long double>(n) * out.pmf[n]);
    }
    out.mean = m1.value();
    out.variance = m2.value() - out.mean * out.mean;
    return out;
}

struct MonteCarloEstimate {
    double mean = 0.0;
    double std_error = 0.0;
};

/// Monte Carlo likelihood: draw n and target states from the prior and
/// average the set density f(Z | X), itself computed exactly by a dynamic
/// programme over which measurements the targets seen so far have claimed.
template <int Nx, int Nz>
[[nodiscard]] MonteCarloEstimate monte_carlo_likelihood(const Instance<Nx, Nz>& inst, std::size_t samples, Rng& rng) {
    inst.check();
    const std::size_t m = inst.Z.size();
    const Vec<Nz> b = inst.obs.offset(inst.s);
    std::vector<double> sc(m);
    for (std::size_t j = 0; j < m; ++j) sc[j] = inst.clutter.spatial_density(inst.Z[j]);
    const auto cp = pmf_table(inst.clutter.cardinality, m + 1);
    std::vector<double> clutter_term(1u << m);
    for (unsigned mask = 0; mask < (1u << m); ++mask) {
        const std::size_t k = m - detail::popcount(mask);
        long double f = k < cp.size() ? cp[k] : 0.0L;
        for (std::size_t i = 2; i <= k; ++i) f *= static_cast<long double>(i);
        for (std::size_t j = 0; j < m; ++j)
            if (!(mask >> j & 1u)) f *= sc[j];
        clutter_term[mask] = static_cast<double>(f);
    }
    std::vector<Mat<Nx>> roots;
    std::vector<double> cum;
    double acc = 0.0;
    for (const auto& c : inst.spatial.components) {
        roots.push_back(psd_sqrt(c.cov));
        acc += c.weight;
        cum.push_back(acc);
    }
    const Eigen::LLT<Mat<Nz>> rl(inst.obs.R);
    const double log_norm = -0.5 * (double(inst.obs.R.rows()) * 1.8378770664093454835606594728112 +
                                    2.0 * rl.matrixLLT().diagonal().array().log().sum());
    const double pd = inst.obs.p_d;

    double sum = 0.0, sum2 = 0.0;
    std::vector<double> dp(1u << m), next(1u << m), lik(m);
    for (std::size_t it = 0; it < samples; ++it) {
        const std::size_t n = sample_cardinality(inst.prior, rng);
        std::fill(dp.begin(), dp.end(), 0.0);
        dp[0] = 1.0;
        for (std::size_t t = 0; t < n; ++t) {
            const double u = uniform01(rng) * acc;
            std::size_t k = 0;
            while (k + 1 < cum.size() && u > cum[k]) ++k;
            const auto& c = inst.spatial.components[k];
            const Vec<Nx> x = c.mean + roots[k] * standard_normal(rng, c.mean.size());
            const Vec<Nz> hx = inst.obs.H * x;
            for (std::size_t j = 0; j < m; ++j) {
                const Vec<Nz> d = inst.Z[j] - b - hx;
                lik[j] = pd * std::exp(log_norm - 0.5 * d.dot(rl.solve(d)));
            }
            std::fill(next.begin(), next.end(), 0.0);
            for (unsigned mask = 0; mask < (1u << m); ++mask) {
                if (dp[mask] == 0.0) continue;
                next[mask] += dp[mask] * (1.0 - pd);
                for (std::size_t j = 0; j < m; ++j)
                    if (!(mask >> j & 1u)) next[mask | (1u << j)] += dp[mask] * lik[j];
            }
            dp.swap(next);
        }
        double f = 0.0;
        for (unsigned mask = 0; mask < (1u << m); ++mask) f += dp[mask] * clutter_term[mask];
        sum += f;
        sum2 += f * f;
    }
    const double ns = static_cast<double>(samples);
    MonteCarloEstimate e;
    e.mean = sum / ns;
    e.std_error = std::sqrt(std::max(0.0, sum2 / ns - e.mean * e.mean) / ns);
    return e;
}

/// Association likelihood with no gating and no group caps:
///   e^{-lambda_c} sum_theta (1-p_d)^{n-|theta|} prod_{assigned} p_d l(z | x)
///   prod_{unassigned} kappa(z)
/// over all injective partial maps from measurements to the given states.
template <int Nx, int Nz>
[[nodiscard]] long double association_likelihood(const std::vector<Vec<Nx>>& targets, const MeasurementSet<Nz>& Z,
                                                 const ObservationModel<Nx, Nz>& obs,
                                                 const ClutterModel<Nz>& clutter, const SensorState& s) {
    const std::size_t n = targets.size(), m = Z.size();
    if (n > 8 || m > 8) throw CapacityError("oracle: association enumeration too large");
    const Vec<Nz> b = obs.offset(s);
    const Eigen::Matrix<long double, Nz, Nz> Rinv = obs.R.template cast<long double>().inverse();
    const long double norm = std::pow(2.0L * 3.14159265358979323846264338327950288L, -0.5L * obs.R.rows()) /
                             std::sqrt(obs.R.template cast<long double>().determinant());
    std::vector<std::vector<long double>> l(m, std::vector<long double>(n));
    for (std::size_t j = 0; j < m; ++j)
        for (std::size_t i = 0; i < n; ++i) {
            const Eigen::Matrix<long double, Nz, 1> d = (Z[j] - b - obs.H * targets[i]).template cast<long double>();
            l[j][i] = static_cast<long double>(obs.p_d) * norm * std::exp(-0.5L * d.dot(Rinv * d));
        }
    const long double miss = 1.0L - static_cast<long double>(obs.p_d);
    KahanSum acc;
    std::vector<char> used(n, 0);
    auto rec = [&](auto& self, std::size_t j, long double prod, std::size_t assigned) -> void {
        if (j == m) {
            acc.add(prod * std::pow(miss, static_cast<long double>(n - assigned)));
            return;
        }
        self(self, j + 1, prod * static_cast<long double>(clutter.intensity(Z[j])), assigned);
        for (std::size_t i = 0; i < n; ++i) {
            if (used[i]) continue;
            used[i] = 1;
            self(self, j + 1, prod * l[j][i], assigned + 1);
            used[i] = 0;
        }
    };
    rec(rec, 0, 1.0L, 0);
    return std::exp(-static_cast<long double>(clutter.rate())) * acc.value();
}

} // namespace scmo::oracle
