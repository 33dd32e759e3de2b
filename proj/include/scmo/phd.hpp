#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "scmo/association.hpp"
#include "scmo/cardinality.hpp"
#include "scmo/errors.hpp"
#include "scmo/models.hpp"

namespace scmo {

/// First-order (Poisson) filter state: the intensity alone.
template <int Nx>
struct PhdState {
    GaussianMixture<Nx> intensity;
};

namespace detail {

template <int Nz>
void require_poisson_clutter(const ClutterModel<Nz>& clutter, const char* who) {
    if (!clutter.is_poisson()) throw ModelMismatchError(std::string(who) + " requires Poisson clutter");
}

} // namespace detail

template <int Nx>
[[nodiscard]] PhdState<Nx> phd_predict(const PhdState<Nx>& state, const MotionModel<Nx>& motion,
                                       const BirthModel<Nx>& birth) {
    return {predict_intensity(state.intensity, motion, birth.intensity)};
}

/// mu_k = mu^phi + sum_z mu^z / (mu_c(z) + mu^z(X)).
template <int Nx, int Nz>
[[nodiscard]] PhdState<Nx> phd_update(const PhdState<Nx>& state, const MeasurementSet<Nz>& Z,
                                      const ObservationModel<Nx, Nz>& obs, const ClutterModel<Nz>& clutter,
                                      const SensorState& s,
                                      double gate = std::numeric_limits<double>::infinity()) {
    detail::require_poisson_clutter(clutter, "phd_update");
    const auto t = associate(state.intensity, Z, obs, s, gate);
    std::vector<double> coef(Z.size(), 0.0);
    for (std::size_t j = 0; j < Z.size(); ++j) {
        const double denom = clutter.intensity(Z[j]) + t.mass[j];
        coef[j] = denom > 0.0 ? 1.0 / denom : 0.0;
    }
    return {corrected_mixture(state.intensity, t, obs.p_d, 1.0, coef)};
}

/// log of  prod_z [mu_c(z) + mu^z(X)] / exp(lambda_c + p_d mu(X)).
template <int Nx, int Nz>
[[nodiscard]] double phd_log_likelihood(const PhdState<Nx>& state, const MeasurementSet<Nz>& Z,
                                        const ObservationModel<Nx, Nz>& obs, const ClutterModel<Nz>& clutter,
                                        const SensorState& s,
                                        double gate = std::numeric_limits<double>::infinity()) {
    detail::require_poisson_clutter(clutter, "phd_log_likelihood");
    const auto t = associate(state.intensity, Z, obs, s, gate);
    double ll = -clutter.rate() - obs.p_d * t.prior_mass;
    for (std::size_t j = 0; j < Z.size(); ++j) {
        const double f = clutter.intensity(Z[j]) + t.mass[j];
        if (!(f > 0.0)) return kNegInf;
        ll += std::log(f);
    }
    return ll;
}

} // namespace scmo
