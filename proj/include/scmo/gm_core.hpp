#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

#include "scmo/errors.hpp"

namespace scmo {

template <int N>
using Vec = Eigen::Matrix<double, N, 1>;
template <int R, int C = R>
using Mat = Eigen::Matrix<double, R, C>;

/// One weighted Gaussian term of an intensity measure.
template <int Dim>
struct GaussianComponent {
    double weight = 0.0;
    Vec<Dim> mean;
    Mat<Dim> cov;
};

/// Weighted sum of Gaussians. The total weight is the expected number of
/// objects; an empty mixture is the zero measure.
template <int Dim>
struct GaussianMixture {
    std::vector<GaussianComponent<Dim>> components;

    [[nodiscard]] double mass() const {
        double m = 0.0;
        for (const auto& c : components) m += c.weight;
        return m;
    }
    [[nodiscard]] std::size_t size() const { return components.size(); }
    [[nodiscard]] bool empty() const { return components.empty(); }

    void scale(double factor) {
        for (auto& c : components) c.weight *= factor;
    }
    [[nodiscard]] GaussianMixture scaled(double factor) const {
        GaussianMixture out = *this;
        out.scale(factor);
        return out;
    }
    void append(const GaussianMixture& other) {
        components.insert(components.end(), other.components.begin(), other.components.end());
    }
};

struct ReductionConfig {
    double prune_threshold = 1e-5;
    /// Squared Mahalanobis distance below which components are merged.
    double merge_distance = 4.0;
    std::size_t max_components = 200;

    void validate() const {
        if (!(prune_threshold >= 0.0)) throw ConfigError("prune_threshold must be >= 0");
        if (max_components < 1) throw ConfigError("max_components must be >= 1");
    }
};

template <typename Derived>
[[nodiscard]] auto symmetrize(const Eigen::MatrixBase<Derived>& a) {
    using M = Eigen::Matrix<double, Derived::RowsAtCompileTime, Derived::ColsAtCompileTime>;
    M out = 0.5 * (a + a.transpose());
    return out;
}

namespace detail {

template <int D>
[[nodiscard]] Eigen::LLT<Mat<D>> checked_llt(const Mat<D>& cov, const char* who) {
    Eigen::LLT<Mat<D>> llt(cov);
    if (llt.info() != Eigen::Success) throw NumericalDomainError(std::string(who) + ": covariance is not SPD");
    return llt;
}

template <int D>
[[nodiscard]] double log_det_from_llt(const Eigen::LLT<Mat<D>>& llt) {
    return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

inline constexpr double kLog2Pi = 1.8378770664093454835606594728112;

} // namespace detail

/// log N(x; mean, cov).
template <int D>
[[nodiscard]] double log_eval_gaussian(const Vec<D>& x, const Vec<D>& mean, const Mat<D>& cov) {
    if (x.size() != mean.size() || cov.rows() != x.size() || cov.cols() != x.size())
        throw DimensionError("eval_gaussian: dimension mismatch");
    const auto llt = detail::checked_llt<D>(cov, "eval_gaussian");
    const Vec<D> r = llt.matrixL().solve(x - mean);
    return -0.5 * (static_cast<double>(x.size()) * detail::kLog2Pi + detail::log_det_from_llt<D>(llt) +
                   r.squaredNorm());
}

template <int D>
[[nodiscard]] double eval_gaussian(const Vec<D>& x, const Vec<D>& mean, const Mat<D>& cov) {
    return std::exp(log_eval_gaussian<D>(x, mean, cov));
}

template <int D>
[[nodiscard]] GaussianComponent<D> kalman_predict(const GaussianComponent<D>& c, const Mat<D>& F, const Mat<D>& Q) {
    if (F.rows() != c.mean.size() || F.cols() != c.mean.size() || Q.rows() != F.rows() || Q.cols() != F.cols())
        throw DimensionError("kalman_predict: dimension mismatch");
    GaussianComponent<D> out;
    out.weight = c.weight;
    out.mean = F * c.mean;
    out.cov = symmetrize(F * c.cov * F.transpose() + Q);
    return out;
}

/// Everything about a linear-Gaussian measurement update that does not
/// depend on the measurement value. Built once per component and reused
/// for every measurement in a frame.
template <int Nx, int Nz>
struct InnovationCache {
    Vec<Nz> predicted_z;
    Mat<Nz> innovation_cov;
    Mat<Nz> innovation_inv;
    double log_norm = 0.0; // -0.5 * (Nz log 2pi + log det S)
    Mat<Nx, Nz> gain;
    Mat<Nx> posterior_cov;

    [[nodiscard]] static InnovationCache make(const GaussianComponent<Nx>& c, const Mat<Nz, Nx>& H,
                                              const Mat<Nz>& R) {
        if (H.cols() != c.mean.size() || R.rows() != H.rows() || R.cols() != H.rows())
            throw DimensionError("kalman_update: dimension mismatch");
        InnovationCache k;
        k.predicted_z = H * c.mean;
        k.innovation_cov = symmetrize(H * c.cov * H.transpose() + R);
        Eigen::LLT<Mat<Nz>> llt(k.innovation_cov);
        if (llt.info() != Eigen::Success) throw NumericalDomainError("kalman_update: singular innovation covariance");
        k.innovation_inv = llt.solve(Mat<Nz>::Identity(H.rows(), H.rows()));
        k.log_norm = -0.5 * (static_cast<double>(H.rows()) * detail::kLog2Pi + detail::log_det_from_llt<Nz>(llt));
        const Mat<Nx, Nz> PHt = c.cov * H.transpose();
        k.gain = PHt * k.innovation_inv;
        // Joseph form keeps the posterior symmetric positive definite.
        const Mat<Nx> I_KH = Mat<Nx>::Identity(c.mean.size(), c.mean.size()) - k.gain * H;
        k.posterior_cov = symmetrize(I_KH * c.cov * I_KH.transpose() + k.gain * R * k.gain.transpose());
        return k;
    }

    [[nodiscard]] double mahalanobis(const Vec<Nz>& z) const {
        const Vec<Nz> r = z - predicted_z;
        return r.dot(innovation_inv * r);
    }
    [[nodiscard]] double log_density(const Vec<Nz>& z) const { return log_norm - 0.5 * mahalanobis(z); }
    [[nodiscard]] Vec<Nx> posterior_mean(const Vec<Nx>& prior_mean, const Vec<Nz>& z) const {
        return prior_mean + gain * (z - predicted_z);
    }
};

template <int Nx>
struct KalmanUpdate {
    GaussianComponent<Nx> posterior;
    double predictive_density = 0.0;
};

/// Linear-Gaussian posterior of one component; weight is left unchanged.
template <int Nx, int Nz>
[[nodiscard]] KalmanUpdate<Nx> kalman_update(const GaussianComponent<Nx>& c, const Vec<Nz>& z, const Mat<Nz, Nx>& H,
                                             const Mat<Nz>& R) {
    const auto k = InnovationCache<Nx, Nz>::make(c, H, R);
    if (z.size() != H.rows()) throw DimensionError("kalman_update: measurement dimension mismatch");
    KalmanUpdate<Nx> out;
    out.posterior.weight = c.weight;
    out.posterior.mean = k.posterior_mean(c.mean, z);
    out.posterior.cov = k.posterior_cov;
    out.predictive_density = std::exp(k.log_density(z));
    return out;
}

/// Prune, merge and cap a mixture, then rescale so that the total mass is
/// unchanged. If pruning removes every component the empty mixture is
/// returned.
template <int D>
[[nodiscard]] GaussianMixture<D> reduce_mixture(const GaussianMixture<D>& in, const ReductionConfig& cfg) {
    cfg.validate();
    const double input_mass = in.mass();

    std::vector<std::size_t> idx;
    idx.reserve(in.size());
    for (std::size_t i = 0; i < in.size(); ++i)
        if (in.components[i].weight >= cfg.prune_threshold && in.components[i].weight > 0.0) idx.push_back(i);
    if (idx.empty()) return {};

    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return in.components[a].weight > in.components[b].weight;
    });

    std::vector<Eigen::LLT<Mat<D>>> chol;
    std::vector<double> trace;
    chol.reserve(in.size());
    trace.reserve(in.size());
    std::vector<std::size_t> slot(in.size(), 0);
    for (std::size_t k = 0; k < idx.size(); ++k) {
        slot[idx[k]] = k;
        chol.emplace_back(in.components[idx[k]].cov);
        trace.push_back(in.components[idx[k]].cov.trace());
        if (chol.back().info() != Eigen::Success) throw NumericalDomainError("reduce_mixture: covariance is not SPD");
    }

    GaussianMixture<D> out;
    std::vector<char> used(idx.size(), 0);
    for (std::size_t lead = 0; lead < idx.size(); ++lead) {
        if (used[lead]) continue;
        const auto& head = in.components[idx[lead]];
        double w = 0.0;
        Vec<D> mean = Vec<D>::Zero(head.mean.size());
        std::vector<std::size_t> group;
        for (std::size_t k = lead; k < idx.size(); ++k) {
            if (used[k]) continue;
            const auto& c = in.components[idx[k]];
            const Vec<D> d = c.mean - head.mean;
            // d' P^-1 d >= |d|^2 / trace(P): skip the solve when that bound already fails.
            if (d.squaredNorm() > cfg.merge_distance * trace[k]) continue;
            const double dist = d.dot(chol[slot[idx[k]]].solve(d));
            if (dist <= cfg.merge_distance) {
                used[k] = 1;
                group.push_back(idx[k]);
                w += c.weight;
                mean += c.weight * c.mean;
            }
        }
        mean /= w;
        Mat<D> cov = Mat<D>::Zero(head.mean.size(), head.mean.size());
        for (std::size_t i : group) {
            const auto& c = in.components[i];
            const Vec<D> d = mean - c.mean;
            cov += c.weight * (c.cov + d * d.transpose());
        }
        out.components.push_back({w, mean, symmetrize(cov / w)});
    }

    if (out.size() > cfg.max_components) {
        std::stable_sort(out.components.begin(), out.components.end(),
                         [](const auto& a, const auto& b) { return a.weight > b.weight; });
        out.components.resize(cfg.max_components);
    }

    const double kept = out.mass();
    if (kept > 0.0) out.scale(input_mass / kept);
    return out;
}

} // namespace scmo
