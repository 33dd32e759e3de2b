#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "scmo/assoc_l2.hpp"
#include "scmo/daughter.hpp"
#include "scmo/errors.hpp"
#include "scmo/log_math.hpp"
#include "scmo/random.hpp"

namespace scmo {

enum class LikelihoodKind { L1, L2 };
enum class ResamplingKind { Roulette, Systematic };

[[nodiscard]] inline std::string_view to_string(LikelihoodKind k) { return k == LikelihoodKind::L1 ? "l1" : "l2"; }

[[nodiscard]] inline LikelihoodKind parse_likelihood_kind(std::string_view s) {
    if (s == "l1") return LikelihoodKind::L1;
    if (s == "l2") return LikelihoodKind::L2;
    throw ConfigError("unknown likelihood kind '" + std::string(s) + "'");
}

[[nodiscard]] inline ResamplingKind parse_resampling_kind(std::string_view s) {
    if (s == "roulette") return ResamplingKind::Roulette;
    if (s == "systematic") return ResamplingKind::Systematic;
    throw ConfigError("unknown resampling scheme '" + std::string(s) + "'");
}

template <int Nx>
struct ParentParticle {
    SensorState y;
    double weight = 1.0;
    DaughterState<Nx> theta;
};

template <int Nx>
using ParticleSet = std::vector<ParentParticle<Nx>>;

struct SmcConfig {
    std::size_t particles = 300;
    /// Resample when the effective sample size drops to r * N or below.
    double resample_fraction = 0.5;
    Eigen::MatrixXd sensor_transition;
    Eigen::MatrixXd sensor_noise;
    LikelihoodKind likelihood = LikelihoodKind::L1;
    FilterKind filter = FilterKind::Phd;
    ResamplingKind resampling = ResamplingKind::Roulette;
    GatingConfig gating;

    void validate() const {
        if (particles < 1) throw ConfigError("particle count must be at least 1");
        if (!(resample_fraction >= 0.0 && resample_fraction <= 1.0))
            throw ConfigError("resample fraction must lie in [0, 1]");
        if (sensor_transition.rows() != sensor_transition.cols() || sensor_noise.rows() != sensor_noise.cols() ||
            sensor_noise.rows() != sensor_transition.rows())
            throw DimensionError("sensor transition and noise must be square and of equal size");
        gating.validate();
    }
};

/// Wall-clock seconds and call counts per stage.
struct StageTimes {
    double predict = 0.0;
    double update = 0.0;
    double likelihood = 0.0;
    std::size_t predict_calls = 0;
    std::size_t update_calls = 0;
    std::size_t likelihood_calls = 0;

    void merge(const StageTimes& o) {
        predict += o.predict;
        update += o.update;
        likelihood += o.likelihood;
        predict_calls += o.predict_calls;
        update_calls += o.update_calls;
        likelihood_calls += o.likelihood_calls;
    }
    [[nodiscard]] double mean_predict() const { return predict_calls ? predict / double(predict_calls) : 0.0; }
    [[nodiscard]] double mean_update() const { return update_calls ? update / double(update_calls) : 0.0; }
    [[nodiscard]] double mean_likelihood() const {
        return likelihood_calls ? likelihood / double(likelihood_calls) : 0.0;
    }
};

namespace detail {

class Stopwatch {
public:
    Stopwatch() : t0_(std::chrono::steady_clock::now()) {}
    [[nodiscard]] double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
    }

private:
    std::chrono::steady_clock::time_point t0_;
};

} // namespace detail

template <int Nx, int Nz>
[[nodiscard]] ParticleSet<Nx> initialize_particles(const SmcConfig& cfg, const FilterModels<Nx, Nz>& models,
                                                   const SensorState& y0) {
    cfg.validate();
    ParticleSet<Nx> out(cfg.particles);
    for (auto& p : out) {
        p.y = y0;
        p.weight = 1.0 / double(cfg.particles);
        p.theta = initial_daughter<Nx, Nz>(cfg.filter, models);
    }
    return out;
}

/// Moves every sensor hypothesis through the transition plus Gaussian noise
/// (skipped when `move_sensor` is false) and predicts every daughter. Each
/// particle draws from its own stream `seeder.stream({i})`.
template <int Nx, int Nz>
void smc_predict(ParticleSet<Nx>& particles, const SmcConfig& cfg, const FilterModels<Nx, Nz>& models,
                 const StreamSeeder& seeder, bool move_sensor = true, StageTimes* times = nullptr) {
    Eigen::MatrixXd root;
    if (move_sensor) root = psd_sqrt(cfg.sensor_noise);
    for (std::size_t i = 0; i < particles.size(); ++i) {
        auto& p = particles[i];
        if (move_sensor) {
            Rng rng = seeder.stream({i});
            p.y = cfg.sensor_transition * p.y + root * standard_normal(rng, p.y.size());
        }
        detail::Stopwatch sw;
        p.theta = daughter_predict(p.theta, models);
        if (times) {
            times->predict += sw.seconds();
            ++times->predict_calls;
        }
    }
}

/// Multi-object log-likelihood of Z for one particle, before its update.
template <int Nx, int Nz>
[[nodiscard]] double particle_log_likelihood(const ParentParticle<Nx>& p, const MeasurementSet<Nz>& Z,
                                             const FilterModels<Nx, Nz>& models, const SmcConfig& cfg,
                                             bool first_step) {
    if (cfg.likelihood == LikelihoodKind::L1) return daughter_log_likelihood(p.theta, Z, models, p.y);
    return l2_log_likelihood(intensity_of(p.theta), Z, models.obs, models.clutter, p.y, cfg.gating, first_step);
}

[[nodiscard]] inline double ess(std::span<const double> weights) {
    double s = 0.0;
    for (double w : weights) s += w * w;
    return s > 0.0 ? 1.0 / s : 0.0;
}

struct UpdateReport {
    double ess = 0.0;
    double weight_sum_error = 0.0;
    /// Largest |sum rho - 1| over the cardinalized daughters.
    double card_sum_error = 0.0;
    /// Largest |mass - mean cardinality| / max(1, mass) over the cardinalized daughters.
    double card_mass_error = 0.0;
    std::size_t variance_clamps = 0;
};

/// Reweights by the configured likelihood and updates every daughter. The
/// weights are accumulated multiplicatively in log form, shifted by their
/// maximum and normalised.
template <int Nx, int Nz>
UpdateReport smc_update(ParticleSet<Nx>& particles, const MeasurementSet<Nz>& Z, const FilterModels<Nx, Nz>& models,
                        const SmcConfig& cfg, bool first_step, StageTimes* times = nullptr) {
    UpdateReport rep;
    std::vector<double> logw(particles.size());
    for (std::size_t i = 0; i < particles.size(); ++i) {
        auto& p = particles[i];
        detail::Stopwatch sl;
        const double ll = particle_log_likelihood(p, Z, models, cfg, first_step);
        if (times) {
            times->likelihood += sl.seconds();
            ++times->likelihood_calls;
        }
        logw[i] = (p.weight > 0.0 ? std::log(p.weight) : kNegInf) + (std::isnan(ll) ? kNegInf : ll);

        detail::Stopwatch su;
        p.theta = daughter_update(p.theta, Z, models, p.y);
        if (times) {
            times->update += su.seconds();
            ++times->update_calls;
        }
        if (const auto* s = std::get_if<SoPhdState<Nx>>(&p.theta); s && s->variance_clamped) ++rep.variance_clamps;
        if (const auto* c = std::get_if<CphdState<Nx>>(&p.theta)) {
            rep.card_sum_error = std::max(rep.card_sum_error, std::abs(c->card.total() - 1.0));
            const double mass = c->intensity.mass();
            rep.card_mass_error =
                std::max(rep.card_mass_error, std::abs(mass - c->card.mean()) / std::max(1.0, mass));
        }
    }
    const double mx = *std::max_element(logw.begin(), logw.end());
    if (mx == kNegInf || !std::isfinite(mx)) throw DegenerateFilterError("all particle weights vanished");
    double sum = 0.0;
    for (std::size_t i = 0; i < particles.size(); ++i) {
        particles[i].weight = std::exp(logw[i] - mx);
        sum += particles[i].weight;
    }
    double check = 0.0;
    for (auto& p : particles) {
        p.weight /= sum;
        check += p.weight;
    }
    rep.weight_sum_error = std::abs(check - 1.0);
    std::vector<double> w(particles.size());
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = particles[i].weight;
    rep.ess = ess(w);
    return rep;
}

namespace detail {

template <int Nx>
[[nodiscard]] ParticleSet<Nx> select(const ParticleSet<Nx>& in, const std::vector<std::size_t>& idx) {
    ParticleSet<Nx> out;
    out.reserve(idx.size());
    const double w = 1.0 / double(idx.size());
    for (std::size_t i : idx) {
        out.push_back(in[i]);
        out.back().weight = w;
    }
    return out;
}

template <int Nx>
[[nodiscard]] std::vector<double> cumulative_weights(const ParticleSet<Nx>& in) {
    std::vector<double> cum(in.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < in.size(); ++i) cum[i] = (acc += in[i].weight);
    return cum;
}

} // namespace detail

/// N independent roulette-wheel draws; weights reset to 1/N.
template <int Nx>
[[nodiscard]] ParticleSet<Nx> resample_roulette(const ParticleSet<Nx>& in, Rng& rng) {
    const auto cum = detail::cumulative_weights(in);
    std::vector<std::size_t> idx(in.size());
    for (auto& k : idx) {
        const double u = uniform01(rng) * cum.back();
        k = std::min<std::size_t>(std::upper_bound(cum.begin(), cum.end(), u) - cum.begin(), in.size() - 1);
    }
    return detail::select(in, idx);
}

/// One uniform offset, N evenly spaced pointers.
template <int Nx>
[[nodiscard]] ParticleSet<Nx> resample_systematic(const ParticleSet<Nx>& in, Rng& rng) {
    const auto cum = detail::cumulative_weights(in);
    const double n = double(in.size());
    const double u0 = uniform01(rng) / n;
    std::vector<std::size_t> idx(in.size());
    std::size_t k = 0;
    for (std::size_t i = 0; i < in.size(); ++i) {
        const double u = (u0 + double(i) / n) * cum.back();
        while (k + 1 < in.size() && cum[k] < u) ++k;
        idx[i] = k;
    }
    return detail::select(in, idx);
}

/// Resamples when ess <= r N. Returns whether it did.
template <int Nx>
bool resample_if_needed(ParticleSet<Nx>& particles, const SmcConfig& cfg, Rng& rng) {
    std::vector<double> w(particles.size());
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = particles[i].weight;
    if (ess(w) > cfg.resample_fraction * double(particles.size())) return false;
    particles = cfg.resampling == ResamplingKind::Roulette ? resample_roulette(particles, rng)
                                                           : resample_systematic(particles, rng);
    return true;
}

struct Estimate {
    SensorState sensor;
    double cardinality = 0.0;
    /// Weighted mean of the daughters' intensity masses.
    double intensity_mass = 0.0;
};

template <int Nx>
[[nodiscard]] Estimate estimate(const ParticleSet<Nx>& particles) {
    Estimate e;
    if (particles.empty()) return e;
    e.sensor = SensorState::Zero(particles.front().y.size());
    for (const auto& p : particles) {
        e.sensor += p.weight * p.y;
        e.cardinality += p.weight * expected_cardinality(p.theta);
        e.intensity_mass += p.weight * intensity_of(p.theta).mass();
    }
    return e;
}

} // namespace scmo
