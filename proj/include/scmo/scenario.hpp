#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "scmo/errors.hpp"
#include "scmo/gm_core.hpp"
#include "scmo/models.hpp"
#include "scmo/random.hpp"

namespace scmo {

enum class Experiment { E1, E2Death, E2Birth };

[[nodiscard]] inline std::string_view to_string(Experiment e) {
    switch (e) {
    case Experiment::E1: return "e1";
    case Experiment::E2Death: return "e2-death";
    case Experiment::E2Birth: return "e2-birth";
    }
    return "?";
}

[[nodiscard]] inline Experiment parse_experiment(std::string_view s) {
    if (s == "e1") return Experiment::E1;
    if (s == "e2-death") return Experiment::E2Death;
    if (s == "e2-birth") return Experiment::E2Birth;
    throw ConfigError("unknown experiment '" + std::string(s) + "'");
}

using State4 = Vec<4>;
using Meas2 = Vec<2>;

/// Ground-truth and sensor parameters. Steps are 0-based here; exported
/// files number them from 1.
struct ScenarioConfig {
    Experiment experiment = Experiment::E1;
    std::size_t steps = 100;
    double dt = 1.0;
    double target_accel_noise = 0.3;
    double sensor_accel_noise = 0.2;
    double p_s = 0.95;
    double p_d = 0.99;
    double birth_rate = 4.0;
    double clutter_rate = 10.0;
    double meas_noise = 0.1;
    double init_velocity_noise = 0.1;
    Meas2 window_lower{-100.0, -100.0};
    Meas2 window_upper{100.0, 100.0};
    /// Scripted counts for the second experiment.
    std::size_t initial_targets = 15;
    std::size_t change_step = 15;
    std::size_t targets_after_change = 1;

    [[nodiscard]] static ScenarioConfig defaults(Experiment e) {
        ScenarioConfig c;
        c.experiment = e;
        if (e != Experiment::E1) {
            c.target_accel_noise = 0.1;
            c.p_s = 1.0;
            c.birth_rate = 0.0;
            c.targets_after_change = e == Experiment::E2Death ? 1 : 30;
        }
        return c;
    }

    void validate() const {
        if (steps < 1) throw ConfigError("steps must be at least 1");
        if (!(dt > 0.0)) throw ConfigError("dt must be positive");
        for (double p : {p_s, p_d})
            if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("probabilities must lie in [0, 1]");
        for (double r : {target_accel_noise, sensor_accel_noise, birth_rate, clutter_rate, meas_noise,
                         init_velocity_noise})
            if (!(r >= 0.0)) throw ConfigError("rates and noise levels must be nonnegative");
        if (!((window_upper - window_lower).minCoeff() > 0.0)) throw ConfigError("window must have positive extent");
    }
};

struct TargetTrack {
    int id = 0;
    std::size_t birth = 0;
    /// One state per step from `birth` on; the target is gone from
    /// `birth + states.size()`.
    std::vector<State4> states;

    [[nodiscard]] std::size_t death() const { return birth + states.size(); }
    [[nodiscard]] bool alive(std::size_t k) const { return k >= birth && k < death(); }
    [[nodiscard]] const State4& at(std::size_t k) const { return states.at(k - birth); }
};

struct ScenarioTruth {
    std::vector<State4> sensor;
    std::vector<TargetTrack> targets;

    [[nodiscard]] std::size_t steps() const { return sensor.size(); }
    [[nodiscard]] std::size_t alive_count(std::size_t k) const {
        std::size_t n = 0;
        for (const auto& t : targets) n += t.alive(k) ? 1 : 0;
        return n;
    }
};

struct MeasurementFrame {
    std::size_t step = 0;
    MeasurementSet<2> measurements;
    /// Target id per measurement, -1 for clutter. Diagnostics only.
    std::vector<int> provenance;
};

namespace detail {

[[nodiscard]] inline Mat<4> ncv_transition(double dt) {
    Mat<4> F = Mat<4>::Identity();
    F(0, 2) = F(1, 3) = dt;
    return F;
}

[[nodiscard]] inline Mat<4> ncv_noise_root(double dt, double sigma) {
    return psd_sqrt(ncv_motion<4>(2, dt, sigma, 1.0).Q);
}

[[nodiscard]] inline State4 spawn(const ScenarioConfig& c, Rng& rng) {
    State4 x;
    for (int i = 0; i < 2; ++i) x(i) = c.window_lower(i) + (c.window_upper(i) - c.window_lower(i)) * uniform01(rng);
    x(2) = x(3) = 0.0;
    if (c.init_velocity_noise > 0.0) {
        std::normal_distribution<double> nd(0.0, c.init_velocity_noise);
        x(2) = nd(rng);
        x(3) = nd(rng);
    }
    return x;
}

} // namespace detail

/// Sensor track from the origin plus target tracks: Poisson births with
/// geometric lifetimes for the first experiment, scripted counts for the
/// second.
[[nodiscard]] inline ScenarioTruth simulate_truth(const ScenarioConfig& c, Rng& rng) {
    c.validate();
    const Mat<4> F = detail::ncv_transition(c.dt);
    const Mat<4> Lt = detail::ncv_noise_root(c.dt, c.target_accel_noise);
    const Mat<4> Ls = detail::ncv_noise_root(c.dt, c.sensor_accel_noise);
    auto noise = [&](const Mat<4>& L) -> State4 { return L * standard_normal(rng, 4); };

    ScenarioTruth t;
    t.sensor.push_back(State4::Zero());
    for (std::size_t k = 1; k < c.steps; ++k) t.sensor.push_back(F * t.sensor.back() + noise(Ls));

    std::vector<std::size_t> active;
    int next_id = 0;
    auto spawn_at = [&](std::size_t k) {
        TargetTrack tr;
        tr.id = next_id++;
        tr.birth = k;
        tr.states.push_back(detail::spawn(c, rng));
        t.targets.push_back(std::move(tr));
        active.push_back(t.targets.size() - 1);
    };
    for (std::size_t k = 0; k < c.steps; ++k) {
        if (k > 0) {
            std::vector<std::size_t> still;
            for (std::size_t i : active) {
                auto& tr = t.targets[i];
                bool survives = true;
                if (c.experiment == Experiment::E1) survives = uniform01(rng) < c.p_s;
                if (!survives) continue;
                tr.states.push_back(F * tr.states.back() + noise(Lt));
                still.push_back(i);
            }
            active.swap(still);
        }
        if (c.experiment == Experiment::E1) {
            const std::size_t born =
                c.birth_rate > 0 ? std::poisson_distribution<std::size_t>(c.birth_rate)(rng) : 0;
            for (std::size_t b = 0; b < born; ++b) spawn_at(k);
        } else if (k == 0) {
            for (std::size_t b = 0; b < c.initial_targets; ++b) spawn_at(0);
        } else if (k == c.change_step) {
            if (c.targets_after_change < active.size()) {
                // Remove the most recently listed targets; the survivors keep their tracks.
                for (std::size_t r = c.targets_after_change; r < active.size(); ++r) {
                    auto& tr = t.targets[active[r]];
                    tr.states.pop_back();
                }
                active.resize(c.targets_after_change);
            } else {
                const std::size_t add = c.targets_after_change - active.size();
                for (std::size_t b = 0; b < add; ++b) spawn_at(k);
            }
        }
    }
    return t;
}

/// Detections of the alive targets (position plus sensor offset plus noise)
/// and uniform clutter, shuffled per frame.
[[nodiscard]] inline std::vector<MeasurementFrame> generate_measurements(const ScenarioTruth& truth,
                                                                        const ScenarioConfig& c, Rng& rng) {
    c.validate();
    std::normal_distribution<double> nd(0.0, c.meas_noise > 0.0 ? c.meas_noise : 1.0);
    const double noise_scale = c.meas_noise > 0.0 ? 1.0 : 0.0;
    std::vector<MeasurementFrame> frames(truth.steps());
    for (std::size_t k = 0; k < truth.steps(); ++k) {
        auto& f = frames[k];
        f.step = k;
        const Meas2 b = truth.sensor[k].head<2>();
        for (const auto& tr : truth.targets) {
            if (!tr.alive(k)) continue;
            if (!(uniform01(rng) < c.p_d)) continue;
            const double ex = nd(rng);
            const double ey = nd(rng);
            const Meas2 noise = noise_scale * Meas2(ex, ey);
            f.measurements.push_back(tr.at(k).head<2>() + b + noise);
            f.provenance.push_back(tr.id);
        }
        const std::size_t nc =
            c.clutter_rate > 0 ? std::poisson_distribution<std::size_t>(c.clutter_rate)(rng) : 0;
        for (std::size_t i = 0; i < nc; ++i) {
            Meas2 z;
            for (int d = 0; d < 2; ++d)
                z(d) = c.window_lower(d) + (c.window_upper(d) - c.window_lower(d)) * uniform01(rng);
            f.measurements.push_back(z);
            f.provenance.push_back(-1);
        }
        std::vector<std::size_t> order(f.measurements.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::shuffle(order.begin(), order.end(), rng);
        MeasurementFrame g;
        g.step = k;
        for (std::size_t i : order) {
            g.measurements.push_back(f.measurements[i]);
            g.provenance.push_back(f.provenance[i]);
        }
        f = std::move(g);
    }
    return frames;
}

} // namespace scmo
