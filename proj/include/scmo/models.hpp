#pragma once

#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "scmo/cardinality.hpp"
#include "scmo/errors.hpp"
#include "scmo/gm_core.hpp"

namespace scmo {

template <int Nz>
using MeasurementSet = std::vector<Vec<Nz>>;

using SensorState = Eigen::VectorXd;

/// Linear-Gaussian sensor with uniform detection probability. The sensor
/// state s enters only through the additive offset b(s) = drift * s.
template <int Nx, int Nz>
struct ObservationModel {
    Mat<Nz, Nx> H;
    Mat<Nz> R;
    double p_d = 1.0;
    Eigen::Matrix<double, Nz, Eigen::Dynamic> drift;

    [[nodiscard]] Vec<Nz> offset(const SensorState& s) const {
        if (drift.cols() == 0) return Vec<Nz>::Zero(H.rows());
        if (drift.cols() != s.size()) throw DimensionError("ObservationModel: sensor state dimension mismatch");
        return drift * s;
    }

    void validate() const {
        if (!(p_d >= 0.0 && p_d <= 1.0)) throw ConfigError("p_d must lie in [0, 1]");
        Eigen::LLT<Mat<Nz>> llt(R);
        if (llt.info() != Eigen::Success) throw NumericalDomainError("measurement noise covariance is not SPD");
    }
};

template <int Nx>
struct MotionModel {
    Mat<Nx> F;
    Mat<Nx> Q;
    double p_s = 1.0;

    void validate() const {
        if (!(p_s >= 0.0 && p_s <= 1.0)) throw ConfigError("p_s must lie in [0, 1]");
    }
};

/// Birth intensity plus the cardinality law it is paired with. The mass of
/// the intensity must equal the mean of the cardinality.
template <int Nx>
struct BirthModel {
    GaussianMixture<Nx> intensity;
    CardinalityModel cardinality = PoissonCardinality{0.0};

    void validate() const {
        const double m = intensity.mass();
        if (std::abs(m - cardinality_mean(cardinality)) > 1e-9 * std::max(1.0, m))
            throw ConfigError("birth intensity mass does not match the birth cardinality mean");
    }
};

/// Everything a daughter filter needs besides its own state.
template <int Nx, int Nz>
struct FilterModels {
    MotionModel<Nx> motion;
    ObservationModel<Nx, Nz> obs;
    BirthModel<Nx> birth;
    ClutterModel<Nz> clutter;
    ReductionConfig reduction;
    /// Largest cardinality represented by the CPHD filter.
    std::size_t n_max = 64;
    /// Squared Mahalanobis distance beyond which a component-measurement
    /// pair is treated as zero likelihood. Infinite means exact.
    double gate = std::numeric_limits<double>::infinity();
};

/// Nearly-constant-velocity model for states ordered (position..., velocity...)
/// with `dims` spatial dimensions and white-noise acceleration of spectral
/// density sigma^2.
template <int Nx>
[[nodiscard]] MotionModel<Nx> ncv_motion(int dims, double dt, double sigma, double p_s) {
    MotionModel<Nx> m;
    const int n = 2 * dims;
    m.F = Mat<Nx>::Identity(n, n);
    m.Q = Mat<Nx>::Zero(n, n);
    const double q = sigma * sigma;
    for (int i = 0; i < dims; ++i) {
        m.F(i, dims + i) = dt;
        m.Q(i, i) = q * dt * dt * dt / 3.0;
        m.Q(i, dims + i) = m.Q(dims + i, i) = q * dt * dt / 2.0;
        m.Q(dims + i, dims + i) = q * dt;
    }
    m.p_s = p_s;
    return m;
}

} // namespace scmo
