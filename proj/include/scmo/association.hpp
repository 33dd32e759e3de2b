#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "scmo/gm_core.hpp"
#include "scmo/models.hpp"

namespace scmo {

/// Per-frame association quantities shared by the three daughter filters:
/// for component i and measurement z the detected-and-associated weight
/// w_i p_d q_i(z - b(s)), and per measurement the association mass
/// mu^z(X) = sum_i w_i p_d q_i(z - b(s)).
template <int Nx, int Nz>
struct AssociationTable {
    std::vector<InnovationCache<Nx, Nz>> caches;
    /// Measurements with the sensor offset removed.
    MeasurementSet<Nz> shifted;
    /// components x measurements
    Eigen::MatrixXd weight;
    std::vector<double> mass;
    double prior_mass = 0.0;
    double missed_mass = 0.0;

    [[nodiscard]] std::size_t num_measurements() const { return shifted.size(); }
};

template <int Nx, int Nz>
[[nodiscard]] AssociationTable<Nx, Nz> associate(const GaussianMixture<Nx>& mixture, const MeasurementSet<Nz>& Z,
                                                 const ObservationModel<Nx, Nz>& obs, const SensorState& s,
                                                 double gate = std::numeric_limits<double>::infinity()) {
    AssociationTable<Nx, Nz> t;
    const Vec<Nz> b = obs.offset(s);
    t.shifted.reserve(Z.size());
    for (const auto& z : Z) t.shifted.push_back(z - b);

    t.prior_mass = mixture.mass();
    t.missed_mass = (1.0 - obs.p_d) * t.prior_mass;
    t.caches.reserve(mixture.size());
    t.weight = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(mixture.size()), static_cast<Eigen::Index>(Z.size()));
    t.mass.assign(Z.size(), 0.0);
    if (obs.p_d == 0.0) {
        for (const auto& c : mixture.components) t.caches.push_back(InnovationCache<Nx, Nz>::make(c, obs.H, obs.R));
        return t;
    }
    for (std::size_t i = 0; i < mixture.size(); ++i) {
        const auto& c = mixture.components[i];
        t.caches.push_back(InnovationCache<Nx, Nz>::make(c, obs.H, obs.R));
        if (c.weight == 0.0) continue;
        const auto& k = t.caches.back();
        const double scale = c.weight * obs.p_d;
        for (std::size_t j = 0; j < Z.size(); ++j) {
            const double d2 = k.mahalanobis(t.shifted[j]);
            if (d2 > gate) continue;
            const double w = scale * std::exp(k.log_norm - 0.5 * d2);
            t.weight(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = w;
            t.mass[j] += w;
        }
    }
    return t;
}

/// Missed-detection term mu^phi: every weight scaled by (1 - p_d).
template <int Nx, int Nz>
[[nodiscard]] GaussianMixture<Nx> missed_detection_term(const GaussianMixture<Nx>& mixture,
                                                        const ObservationModel<Nx, Nz>& obs) {
    return mixture.scaled(1.0 - obs.p_d);
}

/// Association term mu^z: Kalman-updated components weighted by
/// w_i p_d q_i(z - b(s)). Zero-weight components are dropped.
template <int Nx, int Nz>
[[nodiscard]] GaussianMixture<Nx> association_term(const GaussianMixture<Nx>& mixture, const Vec<Nz>& z,
                                                   const ObservationModel<Nx, Nz>& obs, const SensorState& s) {
    GaussianMixture<Nx> out;
    if (obs.p_d == 0.0) return out;
    const Vec<Nz> zs = z - obs.offset(s);
    for (const auto& c : mixture.components) {
        const auto k = InnovationCache<Nx, Nz>::make(c, obs.H, obs.R);
        const double w = c.weight * obs.p_d * std::exp(k.log_density(zs));
        if (w == 0.0) continue;
        out.components.push_back({w, k.posterior_mean(c.mean, zs), k.posterior_cov});
    }
    return out;
}

/// Assembles  missed_coef * mu^phi + sum_z coef[z] * mu^z  from a table.
template <int Nx, int Nz>
[[nodiscard]] GaussianMixture<Nx> corrected_mixture(const GaussianMixture<Nx>& prior, const AssociationTable<Nx, Nz>& t,
                                                    double p_d, double missed_coef,
                                                    const std::vector<double>& meas_coef) {
    GaussianMixture<Nx> out;
    const double miss = (1.0 - p_d) * missed_coef;
    if (miss != 0.0) {
        out.components.reserve(prior.size());
        for (const auto& c : prior.components)
            if (c.weight != 0.0) out.components.push_back({c.weight * miss, c.mean, c.cov});
    }
    for (std::size_t j = 0; j < t.num_measurements(); ++j) {
        if (meas_coef[j] == 0.0) continue;
        for (std::size_t i = 0; i < prior.size(); ++i) {
            const double w = t.weight(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * meas_coef[j];
            if (w == 0.0) continue;
            const auto& k = t.caches[i];
            out.components.push_back({w, k.posterior_mean(prior.components[i].mean, t.shifted[j]), k.posterior_cov});
        }
    }
    return out;
}

/// Intensity prediction shared by all three filters: birth plus the
/// p_s-thinned, propagated previous intensity.
template <int Nx>
[[nodiscard]] GaussianMixture<Nx> predict_intensity(const GaussianMixture<Nx>& mixture, const MotionModel<Nx>& motion,
                                                    const GaussianMixture<Nx>& birth) {
    GaussianMixture<Nx> out = birth;
    if (motion.p_s == 0.0) return out;
    out.components.reserve(birth.size() + mixture.size());
    for (const auto& c : mixture.components) {
        auto p = kalman_predict<Nx>(c, motion.F, motion.Q);
        p.weight *= motion.p_s;
        out.components.push_back(std::move(p));
    }
    return out;
}

} // namespace scmo
