#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "scmo/association.hpp"
#include "scmo/cardinality.hpp"
#include "scmo/errors.hpp"
#include "scmo/log_math.hpp"
#include "scmo/models.hpp"

namespace scmo {

template <int Nx>
struct CphdState {
    GaussianMixture<Nx> intensity;
    CardinalityDist card;
};

/// Survivor cardinality under uniform survival: the binomial thinning of rho.
[[nodiscard]] inline CardinalityDist thin_cardinality(const CardinalityDist& rho, double p_s) {
    CardinalityDist out;
    const std::size_t N = rho.n_max();
    out.rho.assign(N + 1, 0.0);
    if (p_s >= 1.0) return rho;
    if (p_s <= 0.0) {
        out.rho[0] = rho.total();
        return out;
    }
    const double lp = std::log(p_s), lq = std::log1p(-p_s);
    for (std::size_t m = 0; m <= N; ++m) {
        if (rho.rho[m] == 0.0) continue;
        const double lr = std::log(rho.rho[m]) + log_factorial(m);
        for (std::size_t n = 0; n <= m; ++n)
            out.rho[n] += std::exp(lr - log_factorial(n) - log_factorial(m - n) + double(n) * lp + double(m - n) * lq);
    }
    return out;
}

/// Discrete convolution truncated to the first n_max + 1 entries.
[[nodiscard]] inline CardinalityDist convolve_cardinality(const CardinalityDist& a, const CardinalityDist& b,
                                                          std::size_t n_max) {
    CardinalityDist out;
    out.rho.assign(n_max + 1, 0.0);
    for (std::size_t i = 0; i < a.rho.size() && i <= n_max; ++i) {
        if (a.rho[i] == 0.0) continue;
        for (std::size_t j = 0; j < b.rho.size() && i + j <= n_max; ++j) out.rho[i + j] += a.rho[i] * b.rho[j];
    }
    return out;
}

template <int Nx>
[[nodiscard]] CphdState<Nx> cphd_predict(const CphdState<Nx>& state, const MotionModel<Nx>& motion,
                                         const BirthModel<Nx>& birth) {
    const std::size_t N = state.card.n_max();
    CphdState<Nx> out;
    out.intensity = predict_intensity(state.intensity, motion, birth.intensity);
    const auto born = truncate_to_dist(birth.cardinality, N).dist;
    out.card = convolve_cardinality(born, thin_cardinality(state.card, motion.p_s), N);
    out.card.normalize();
    return out;
}

/// Corrector quantities of the cardinalized update for one frame.
///
/// With s = mu / mu(X) the spatial law, v_z = <p_d l(z|.), s> / s_c(z) and
/// D_n = n! rho_c(n), the detection-indexed terms are
///   Upsilon^d[Z](n) = sum_j D_{|Z|-j} P(n, j+d) (1-p_d)^{n-j-d} e_j(v) / mu(X)^d
/// with P(n, k) = n! / (n-k)!.
struct CphdCorrectors {
    /// log <Upsilon^0[Z], rho>
    double log_norm = kNegInf;
    /// <Upsilon^1[Z], rho> / <Upsilon^0[Z], rho>
    double l1_missed = 0.0;
    /// <Upsilon^1[Z \ z], rho> / <Upsilon^0[Z], rho>
    std::vector<double> l1;
    /// Posterior cardinality, normalised.
    CardinalityDist posterior;
    /// Sum of log s_c(z); the likelihood is exp(log_sc + log_norm).
    double log_sc = 0.0;
    double log_likelihood = kNegInf;
};

namespace detail {

// g_d[j] = log sum_n P(n, j+d) (1-p_d)^{n-j-d} rho(n), j = 0..jmax.
[[nodiscard]] inline std::vector<double> cphd_g(const CardinalityDist& rho, double log_q, std::size_t d,
                                                std::size_t jmax) {
    const std::size_t N = rho.n_max();
    std::vector<double> g(jmax + 1, kNegInf);
    std::vector<double> terms;
    terms.reserve(N + 1);
    for (std::size_t j = 0; j <= jmax; ++j) {
        const std::size_t k = j + d;
        terms.clear();
        for (std::size_t n = k; n <= N; ++n) {
            if (rho.rho[n] <= 0.0) continue;
            const double lq = log_pow(log_q, double(n - k));
            if (lq == kNegInf) continue;
            terms.push_back(std::log(rho.rho[n]) + log_falling_factorial(n, k) + lq);
        }
        g[j] = log_sum_exp(terms);
    }
    return g;
}

// log sum_{j=0..msub} D_{msub-j} e_j exp(g[j])
[[nodiscard]] inline double cphd_inner(const std::vector<SignedLog>& D, const ScaledEsf& e,
                                       const std::vector<double>& g, std::size_t msub,
                                       std::vector<double>& scratch) {
    scratch.clear();
    for (std::size_t j = 0; j <= msub && j < g.size(); ++j) {
        const double le = e.log_value(j);
        const auto& dn = D[msub - j];
        if (le == kNegInf || dn.is_zero() || g[j] == kNegInf) continue;
        scratch.push_back(dn.log_abs + le + g[j]);
    }
    return log_sum_exp(scratch);
}

template <int Nx, int Nz>
[[nodiscard]] CphdCorrectors cphd_correctors_from(const CphdState<Nx>& state, const AssociationTable<Nx, Nz>& t,
                                                  const MeasurementSet<Nz>& Z, const ObservationModel<Nx, Nz>& obs,
                                                  const ClutterModel<Nz>& clutter, bool full) {
    const std::size_t m = Z.size();
    const std::size_t N = state.card.n_max();
    const double mass = t.prior_mass;
    const double inv_mass = mass > 0.0 ? 1.0 / mass : 0.0;
    CphdCorrectors c;
    std::vector<double> v(m);
    for (std::size_t j = 0; j < m; ++j) {
        const double sc = clutter.spatial_density(Z[j]);
        v[j] = t.mass[j] * inv_mass / sc;
        c.log_sc += std::log(sc);
    }
    std::vector<SignedLog> D(m + 1);
    for (std::size_t n = 0; n <= m; ++n) {
        D[n] = log_factorial_pmf(clutter.cardinality, n);
        if (D[n].sign < 0) throw NumericalDomainError("clutter cardinality has a negative mass");
    }
    const double log_q = obs.p_d >= 1.0 ? kNegInf : std::log1p(-obs.p_d);
    const double log_scale = esf_log_scale(v);
    const ScaledEsf e = scaled_esf(v, log_scale);
    const auto g0 = cphd_g(state.card, log_q, 0, m);
    std::vector<double> scratch;
    c.log_norm = cphd_inner(D, e, g0, m, scratch);
    if (c.log_norm == kNegInf || !std::isfinite(c.log_norm))
        throw DegenerateLikelihoodError("cardinalized update: <Upsilon^0, rho> vanishes");
    c.log_likelihood = c.log_sc + c.log_norm;
    if (!full) return c;

    // Posterior cardinality: rho(n) Upsilon^0[Z](n), normalised.
    c.posterior.rho.assign(N + 1, 0.0);
    std::vector<double> terms;
    for (std::size_t n = 0; n <= N; ++n) {
        if (state.card.rho[n] <= 0.0) continue;
        terms.clear();
        for (std::size_t j = 0; j <= std::min(m, n); ++j) {
            const double le = e.log_value(j);
            const double lq = log_pow(log_q, double(n - j));
            if (le == kNegInf || D[m - j].is_zero() || lq == kNegInf) continue;
            terms.push_back(D[m - j].log_abs + log_falling_factorial(n, j) + lq + le);
        }
        if (terms.empty()) continue;
        c.posterior.rho[n] = std::exp(std::log(state.card.rho[n]) + log_sum_exp(terms) - c.log_norm);
    }
    c.posterior.normalize();

    if (mass <= 0.0) {
        c.l1.assign(m, 0.0);
        return c;
    }
    const double log_inv_mass = -std::log(mass);
    const auto g1 = cphd_g(state.card, log_q, 1, m);
    c.l1_missed = std::exp(cphd_inner(D, e, g1, m, scratch) + log_inv_mass - c.log_norm);
    c.l1.assign(m, 0.0);
    for (std::size_t z = 0; z < m; ++z) {
        const ScaledEsf ez = scaled_esf(v, log_scale, z);
        c.l1[z] = std::exp(cphd_inner(D, ez, g1, m - 1, scratch) + log_inv_mass - c.log_norm);
    }
    return c;
}

} // namespace detail

template <int Nx, int Nz>
[[nodiscard]] CphdCorrectors cphd_correctors(const CphdState<Nx>& state, const MeasurementSet<Nz>& Z,
                                             const ObservationModel<Nx, Nz>& obs, const ClutterModel<Nz>& clutter,
                                             const SensorState& s,
                                             double gate = std::numeric_limits<double>::infinity()) {
    const auto t = associate(state.intensity, Z, obs, s, gate);
    return detail::cphd_correctors_from(state, t, Z, obs, clutter, true);
}

/// Cardinalized update. The intensity is
///   mu^phi l_1(phi) + sum_z mu^z / s_c(z) * l_1(z)
/// and is rescaled afterwards so that its mass equals the posterior mean
/// cardinality.
template <int Nx, int Nz>
[[nodiscard]] CphdState<Nx> cphd_update(const CphdState<Nx>& state, const MeasurementSet<Nz>& Z,
                                        const ObservationModel<Nx, Nz>& obs, const ClutterModel<Nz>& clutter,
                                        const SensorState& s, double gate = std::numeric_limits<double>::infinity()) {
    const auto t = associate(state.intensity, Z, obs, s, gate);
    const auto c = detail::cphd_correctors_from(state, t, Z, obs, clutter, true);
    std::vector<double> coef(Z.size());
    for (std::size_t j = 0; j < Z.size(); ++j) coef[j] = c.l1[j] / clutter.spatial_density(Z[j]);
    CphdState<Nx> out;
    out.intensity = corrected_mixture(state.intensity, t, obs.p_d, c.l1_missed, coef);
    out.card = c.posterior;
    const double mass = out.intensity.mass();
    if (mass > 0.0) out.intensity.scale(out.card.mean() / mass);
    return out;
}

template <int Nx, int Nz>
[[nodiscard]] double cphd_log_likelihood(const CphdState<Nx>& state, const MeasurementSet<Nz>& Z,
                                         const ObservationModel<Nx, Nz>& obs, const ClutterModel<Nz>& clutter,
                                         const SensorState& s,
                                         double gate = std::numeric_limits<double>::infinity()) {
    const auto t = associate(state.intensity, Z, obs, s, gate);
    return detail::cphd_correctors_from(state, t, Z, obs, clutter, false).log_likelihood;
}

} // namespace scmo
