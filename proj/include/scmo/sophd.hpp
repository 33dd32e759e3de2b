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

/// Second-order (Panjer) filter state: intensity plus the variance of the
/// target number over the whole state space.
template <int Nx>
struct SoPhdState {
    GaussianMixture<Nx> intensity;
    double variance = 0.0;
    /// Set by an update whose variance came out negative and was clamped.
    bool variance_clamped = false;
};

template <int Nx>
[[nodiscard]] SoPhdState<Nx> sophd_predict(const SoPhdState<Nx>& state, const MotionModel<Nx>& motion,
                                           const BirthModel<Nx>& birth) {
    const double mass = state.intensity.mass();
    const double ps = motion.p_s;
    SoPhdState<Nx> out;
    out.intensity = predict_intensity(state.intensity, motion, birth.intensity);
    out.variance = cardinality_variance(birth.cardinality) + ps * ps * state.variance + ps * (1.0 - ps) * mass;
    return out;
}

namespace detail {

/// Coefficients of the Panjer corrector sums
///   Y_u(W) = sum_j A_{j+u} C_{|W|-j} e_j(W),
/// with A_i = (alpha)_i / (beta F_d)^i, F_d = mu(X) (1 + p_d / beta), and
/// C_n the clutter factorial term normalised so that
///   n! rho_c(n) = K_c C_n.
/// e_j runs over v_z = mu^z(X) / s_c(z).
class PanjerSums {
public:
    PanjerSums(const PanjerParams& prior, double p_d, const CardinalityModel& clutter, std::vector<double> v)
        : v_(std::move(v)), log_scale_(esf_log_scale(v_)) {
        const std::size_t m = v_.size();
        const double mass = prior.mean;
        a_.resize(m + 3);
        if (prior.is_poisson()) {
            for (auto& a : a_) a = {0.0, 1};
            log_target_const_ = -p_d * mass;
        } else {
            const double bf = mass * (prior.beta + p_d);
            if (bf == 0.0) throw DegenerateLikelihoodError("Panjer corrector: beta * F_d vanishes");
            const double log_bf = std::log(std::abs(bf));
            const int sign_bf = bf > 0 ? 1 : -1;
            for (std::size_t i = 0; i < a_.size(); ++i) {
                SignedLog p = log_pochhammer(prior.alpha, i);
                if (!p.is_zero()) {
                    p.log_abs -= static_cast<double>(i) * log_bf;
                    if (sign_bf < 0 && i % 2 == 1) p.sign = -p.sign;
                }
                a_[i] = p;
            }
            const double f = 1.0 + p_d / prior.beta;
            if (f < 0.0) throw DegenerateLikelihoodError("Panjer corrector: 1 + p_d / beta is negative");
            log_target_const_ = f == 0.0 ? kNegInf : -prior.alpha * std::log(f);
        }

        c_.resize(m + 1);
        if (const auto* p = std::get_if<PoissonCardinality>(&clutter)) {
            for (std::size_t n = 0; n <= m; ++n)
                c_[n] = (n == 0) ? SignedLog{0.0, 1}
                                 : (p->rate > 0 ? SignedLog{static_cast<double>(n) * std::log(p->rate), 1} : SignedLog{});
            log_clutter_const_ = -p->rate;
        } else if (const auto* pj = std::get_if<PanjerCardinality>(&clutter)) {
            check_panjer(*pj);
            const double b1 = pj->beta + 1.0;
            for (std::size_t n = 0; n <= m; ++n) {
                SignedLog p = log_pochhammer(pj->alpha, n);
                if (!p.is_zero()) {
                    p.log_abs -= static_cast<double>(n) * std::log(std::abs(b1));
                    if (b1 < 0 && n % 2 == 1) p.sign = -p.sign;
                }
                c_[n] = p;
            }
            log_clutter_const_ = pj->alpha * std::log(pj->beta / b1);
        } else {
            for (std::size_t n = 0; n <= m; ++n) c_[n] = log_factorial_pmf(clutter, n);
            log_clutter_const_ = 0.0;
        }
    }

    [[nodiscard]] std::size_t size() const { return v_.size(); }
    [[nodiscard]] const std::vector<double>& values() const { return v_; }
    [[nodiscard]] double log_target_const() const { return log_target_const_; }
    [[nodiscard]] double log_clutter_const() const { return log_clutter_const_; }

    [[nodiscard]] ScaledEsf esf_without(std::size_t a = static_cast<std::size_t>(-1),
                                        std::size_t b = static_cast<std::size_t>(-1)) const {
        return scaled_esf(v_, log_scale_, a, b);
    }

    /// Y_u over the set whose scaled ESF is `e`.
    [[nodiscard]] SignedLog y(std::size_t u, const ScaledEsf& e) const {
        const std::size_t msub = e.e.size() - 1;
        std::vector<SignedLog> terms;
        terms.reserve(msub + 1);
        for (std::size_t j = 0; j <= msub; ++j) terms.push_back(term(u, j, msub - j, e, 1.0));
        return signed_log_sum(terms);
    }

    /// sum_j A_{j+u} C_{msub-j} mult(j) e_{j+shift}
    template <typename Mult>
    [[nodiscard]] SignedLog shifted_sum(std::size_t u, std::size_t shift, std::size_t msub, const ScaledEsf& e,
                                        Mult mult) const {
        std::vector<SignedLog> terms;
        if (msub + shift + 1 > e.e.size()) return {};
        for (std::size_t j = 0; j <= msub; ++j) {
            SignedLog t = term(u, j, msub - j, e, 1.0, shift);
            if (t.is_zero()) continue;
            t.log_abs += std::log(mult(j));
            terms.push_back(t);
        }
        return signed_log_sum(terms);
    }

private:
    [[nodiscard]] SignedLog term(std::size_t u, std::size_t j, std::size_t n_clutter, const ScaledEsf& e, double,
                                 std::size_t shift = 0) const {
        const double le = e.log_value(j + shift);
        if (le == kNegInf) return {};
        SignedLog t = a_[j + u] * c_[n_clutter];
        if (t.is_zero()) return {};
        t.log_abs += le;
        return t;
    }

    std::vector<double> v_;
    double log_scale_ = 0.0;
    std::vector<SignedLog> a_;
    std::vector<SignedLog> c_;
    double log_target_const_ = 0.0;
    double log_clutter_const_ = 0.0;
};

[[nodiscard]] inline double ratio(SignedLog num, SignedLog den) { return (num / den).value(); }

} // namespace detail

/// Corrector terms of the Panjer update for one frame.
struct SoPhdCorrectors {
    PanjerParams prior;
    std::vector<double> assoc_mass; // mu^z(X)
    double missed_mass = 0.0;       // mu^phi(X)
    SignedLog y0;                   // Y_0(Z)
    double l1_missed = 0.0;
    double l2_missed = 0.0;
    std::vector<double> l1; // l_1(z)
    std::vector<double> l2; // l_2(z)
    /// sum_z v_z l_1(z), sum_z v_z l_2(z), sum_{z != z'} v_z v_z' l_2(z, z')
    double sum_v_l1 = 0.0;
    double sum_v_l2 = 0.0;
    double pair_sum = 0.0;
    double log_likelihood = kNegInf;
    detail::PanjerSums sums;

    /// l_2(z, z'), zero on the diagonal.
    [[nodiscard]] double l2_pair(std::size_t a, std::size_t b) const {
        if (a == b) return 0.0;
        return detail::ratio(sums.y(2, sums.esf_without(a, b)), y0);
    }
    [[nodiscard]] const std::vector<double>& v() const { return sums.values(); }
};

namespace detail {

template <int Nx, int Nz>
[[nodiscard]] SoPhdCorrectors sophd_correctors_from(const SoPhdState<Nx>& state, const AssociationTable<Nx, Nz>& t,
                                                    const MeasurementSet<Nz>& Z, const ObservationModel<Nx, Nz>& obs,
                                                    const ClutterModel<Nz>& clutter, bool per_measurement) {
    const double mass = t.prior_mass;
    const PanjerParams prior = panjer_from_moments(mass, std::max(0.0, state.variance));
    const std::size_t m = Z.size();
    std::vector<double> v(m);
    double log_sc = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
        const double sc = clutter.spatial_density(Z[j]);
        v[j] = t.mass[j] / sc;
        log_sc += std::log(sc);
    }
    SoPhdCorrectors c{prior, t.mass, t.missed_mass, {}, 0, 0, {}, {}, 0, 0, 0, kNegInf,
                      PanjerSums(prior, obs.p_d, clutter.cardinality, std::move(v))};
    const auto& S = c.sums;
    const ScaledEsf full = S.esf_without();
    c.y0 = S.y(0, full);
    if (c.y0.sign <= 0 || !std::isfinite(c.y0.log_abs))
        throw DegenerateLikelihoodError("Panjer update: Y_0 is not positive");
    c.log_likelihood = log_sc + S.log_target_const() + S.log_clutter_const() + c.y0.log_abs;
    if (!per_measurement) return c;

    c.l1_missed = ratio(S.y(1, full), c.y0);
    c.l2_missed = ratio(S.y(2, full), c.y0);
    c.l1.resize(m);
    c.l2.resize(m);
    for (std::size_t j = 0; j < m; ++j) {
        const ScaledEsf without = S.esf_without(j);
        c.l1[j] = ratio(S.y(1, without), c.y0);
        c.l2[j] = ratio(S.y(2, without), c.y0);
    }
    if (m >= 1) {
        c.sum_v_l1 = ratio(S.shifted_sum(1, 1, m - 1, full, [](std::size_t j) { return double(j + 1); }), c.y0);
        c.sum_v_l2 = ratio(S.shifted_sum(2, 1, m - 1, full, [](std::size_t j) { return double(j + 1); }), c.y0);
    }
    if (m >= 2)
        c.pair_sum = ratio(
            S.shifted_sum(2, 2, m - 2, full, [](std::size_t j) { return double(j + 1) * double(j + 2); }), c.y0);
    return c;
}

} // namespace detail

template <int Nx, int Nz>
[[nodiscard]] SoPhdCorrectors sophd_correctors(const SoPhdState<Nx>& state, const MeasurementSet<Nz>& Z,
                                               const ObservationModel<Nx, Nz>& obs, const ClutterModel<Nz>& clutter,
                                               const SensorState& s,
                                               double gate = std::numeric_limits<double>::infinity()) {
    const auto t = associate(state.intensity, Z, obs, s, gate);
    return detail::sophd_correctors_from(state, t, Z, obs, clutter, true);
}

/// Panjer update. The measurement-driven part of the intensity is weighted
/// by l_1(z) / s_c(z); the variance follows the quadratic corrector formula
/// and is clamped at zero (flagged) if rounding drives it negative.
template <int Nx, int Nz>
[[nodiscard]] SoPhdState<Nx> sophd_update(const SoPhdState<Nx>& state, const MeasurementSet<Nz>& Z,
                                          const ObservationModel<Nx, Nz>& obs, const ClutterModel<Nz>& clutter,
                                          const SensorState& s,
                                          double gate = std::numeric_limits<double>::infinity()) {
    const auto t = associate(state.intensity, Z, obs, s, gate);
    const auto c = detail::sophd_correctors_from(state, t, Z, obs, clutter, true);
    std::vector<double> coef(Z.size());
    double post_mass = c.missed_mass * c.l1_missed;
    for (std::size_t j = 0; j < Z.size(); ++j) {
        coef[j] = c.l1[j] / clutter.spatial_density(Z[j]);
        post_mass += c.v()[j] * c.l1[j];
    }
    SoPhdState<Nx> out;
    out.intensity = corrected_mixture(state.intensity, t, obs.p_d, c.l1_missed, coef);
    const double phi = c.missed_mass;
    double var = post_mass + phi * phi * (c.l2_missed - c.l1_missed * c.l1_missed) +
                 2.0 * phi * (c.sum_v_l2 - c.l1_missed * c.sum_v_l1) + (c.pair_sum - c.sum_v_l1 * c.sum_v_l1);
    if (!std::isfinite(var)) throw DegenerateLikelihoodError("Panjer update: non-finite variance");
    if (var < 0.0) {
        var = 0.0;
        out.variance_clamped = true;
    }
    out.variance = var;
    return out;
}

template <int Nx, int Nz>
[[nodiscard]] double sophd_log_likelihood(const SoPhdState<Nx>& state, const MeasurementSet<Nz>& Z,
                                          const ObservationModel<Nx, Nz>& obs, const ClutterModel<Nz>& clutter,
                                          const SensorState& s,
                                          double gate = std::numeric_limits<double>::infinity()) {
    const auto t = associate(state.intensity, Z, obs, s, gate);
    return detail::sophd_correctors_from(state, t, Z, obs, clutter, false).log_likelihood;
}

} // namespace scmo
