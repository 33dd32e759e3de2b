#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "scmo/errors.hpp"
#include "scmo/gm_core.hpp"
#include "scmo/log_math.hpp"
#include "scmo/models.hpp"

namespace scmo {

template <int Nx>
struct ExtractedTargets {
    std::vector<Vec<Nx>> states;
    [[nodiscard]] std::size_t size() const { return states.size(); }
};

/// One state per component whose weight exceeds 0.5.
template <int Nx>
[[nodiscard]] ExtractedTargets<Nx> extract_targets(const GaussianMixture<Nx>& mixture) {
    ExtractedTargets<Nx> out;
    for (const auto& c : mixture.components)
        if (c.weight > 0.5) out.states.push_back(c.mean);
    return out;
}

struct GatingConfig {
    double tau0 = 1e-7;
    double tau = 1e-3;
    std::size_t max_group_measurements = 3;
    std::size_t max_group_targets = 3;

    void validate() const {
        if (!(tau0 >= 0.0 && tau >= 0.0)) throw ConfigError("gating thresholds must be nonnegative");
        if (max_group_measurements < 1 || max_group_targets < 1) throw ConfigError("group caps must be at least 1");
    }
    [[nodiscard]] double threshold(bool first_step) const { return first_step ? tau0 : tau; }
};

struct L2Edge {
    std::size_t target;
    std::size_t measurement;
    /// log of p_d l(z | x, s)
    double log_lik;
};

/// A connected component of the gated target-measurement graph.
struct L2Group {
    std::vector<std::size_t> targets;
    std::vector<std::size_t> measurements;
    std::vector<L2Edge> edges;
};

namespace detail {

struct UnionFind {
    std::vector<std::size_t> parent;
    std::vector<std::size_t> n_targets;
    std::vector<std::size_t> n_meas;

    UnionFind(std::size_t targets, std::size_t meas) : parent(targets + meas), n_targets(parent.size(), 0),
                                                       n_meas(parent.size(), 0) {
        std::iota(parent.begin(), parent.end(), std::size_t{0});
        for (std::size_t i = 0; i < parent.size(); ++i) (i < targets ? n_targets : n_meas)[i] = 1;
    }
    std::size_t find(std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    }
};

} // namespace detail

/// Edges with p_d l(z | x, s) above the step's threshold, grouped into
/// connected components. Edges are admitted in order of decreasing
/// likelihood and one that would push a component past either cap is
/// dropped, so oversized clusters are trimmed rather than rejected.
template <int Nx, int Nz>
[[nodiscard]] std::vector<L2Group> gate_and_cluster(const ExtractedTargets<Nx>& targets, const MeasurementSet<Nz>& Z,
                                                    const ObservationModel<Nx, Nz>& obs, const SensorState& s,
                                                    const GatingConfig& cfg, bool first_step) {
    cfg.validate();
    const std::size_t n = targets.size(), m = Z.size();
    std::vector<L2Edge> edges;
    if (obs.p_d > 0.0 && n > 0 && m > 0) {
        const Eigen::LLT<Mat<Nz>> llt(obs.R);
        if (llt.info() != Eigen::Success) throw NumericalDomainError("measurement noise covariance is not SPD");
        const double log_norm = -0.5 * (double(obs.R.rows()) * detail::kLog2Pi + detail::log_det_from_llt<Nz>(llt));
        const double log_tau = std::log(cfg.threshold(first_step));
        const double log_pd = std::log(obs.p_d);
        const Vec<Nz> b = obs.offset(s);
        for (std::size_t i = 0; i < n; ++i) {
            const Vec<Nz> hx = obs.H * targets.states[i];
            for (std::size_t j = 0; j < m; ++j) {
                const Vec<Nz> d = Z[j] - b - hx;
                const double ll = log_pd + log_norm - 0.5 * d.dot(llt.solve(d));
                if (ll > log_tau) edges.push_back({i, j, ll});
            }
        }
    }
    std::stable_sort(edges.begin(), edges.end(), [](const L2Edge& a, const L2Edge& b) { return a.log_lik > b.log_lik; });

    detail::UnionFind uf(n, m);
    std::vector<L2Edge> kept;
    for (const auto& e : edges) {
        std::size_t a = uf.find(e.target), b = uf.find(n + e.measurement);
        if (a != b) {
            if (uf.n_targets[a] + uf.n_targets[b] > cfg.max_group_targets ||
                uf.n_meas[a] + uf.n_meas[b] > cfg.max_group_measurements)
                continue;
            uf.parent[b] = a;
            uf.n_targets[a] += uf.n_targets[b];
            uf.n_meas[a] += uf.n_meas[b];
        }
        kept.push_back(e);
    }

    std::vector<std::size_t> slot(n + m, static_cast<std::size_t>(-1));
    std::vector<L2Group> groups;
    auto group_of = [&](std::size_t node) -> L2Group& {
        const std::size_t r = uf.find(node);
        if (slot[r] == static_cast<std::size_t>(-1)) {
            slot[r] = groups.size();
            groups.emplace_back();
        }
        return groups[slot[r]];
    };
    for (std::size_t i = 0; i < n; ++i) group_of(i).targets.push_back(i);
    for (std::size_t j = 0; j < m; ++j) group_of(n + j).measurements.push_back(j);
    for (const auto& e : kept) group_of(e.target).edges.push_back(e);
    return groups;
}

namespace detail {

// log sum over injective partial maps built from `edges`, measurement by
// measurement, of prod (p_d l / kappa) * (1 - p_d)^(unassigned targets).
inline void l2_enumerate(const L2Group& g, std::size_t pos, std::vector<char>& used, double acc, std::size_t assigned,
                         const std::vector<double>& log_kappa, double log_miss, std::vector<double>& out) {
    if (pos == g.measurements.size()) {
        const double miss = log_pow(log_miss, double(g.targets.size() - assigned));
        if (miss != kNegInf) out.push_back(acc + miss);
        return;
    }
    const std::size_t z = g.measurements[pos];
    l2_enumerate(g, pos + 1, used, acc, assigned, log_kappa, log_miss, out);
    for (const auto& e : g.edges) {
        if (e.measurement != z) continue;
        const auto t = static_cast<std::size_t>(
            std::find(g.targets.begin(), g.targets.end(), e.target) - g.targets.begin());
        if (used[t]) continue;
        used[t] = 1;
        l2_enumerate(g, pos + 1, used, acc + e.log_lik - log_kappa[z], assigned + 1, log_kappa, log_miss, out);
        used[t] = 0;
    }
}

} // namespace detail

/// Association-based log-likelihood
///   sum_z log kappa(z) - lambda_c
///   + sum_groups log sum_theta (1-p_d)^(n_g - |theta|) prod_{(z,x) in theta} p_d l(z|x,s) / kappa(z),
/// with kappa the clutter intensity.
template <int Nx, int Nz>
[[nodiscard]] double l2_log_likelihood(const std::vector<L2Group>& groups, const MeasurementSet<Nz>& Z,
                                       const ObservationModel<Nx, Nz>& obs, const ClutterModel<Nz>& clutter) {
    if (!clutter.is_poisson()) throw ModelMismatchError("association likelihood requires Poisson clutter");
    std::vector<double> log_kappa(Z.size());
    double ll = -clutter.rate();
    for (std::size_t j = 0; j < Z.size(); ++j) {
        log_kappa[j] = std::log(clutter.intensity(Z[j]));
        ll += log_kappa[j];
    }
    const double log_miss = obs.p_d >= 1.0 ? kNegInf : std::log1p(-obs.p_d);
    std::vector<double> terms;
    std::vector<char> used;
    for (const auto& g : groups) {
        if (g.edges.empty()) {
            ll += log_pow(log_miss, double(g.targets.size()));
            continue;
        }
        terms.clear();
        used.assign(g.targets.size(), 0);
        detail::l2_enumerate(g, 0, used, 0.0, 0, log_kappa, log_miss, terms);
        ll += log_sum_exp(terms);
    }
    return std::isnan(ll) ? kNegInf : ll;
}

template <int Nx, int Nz>
[[nodiscard]] double l2_log_likelihood(const GaussianMixture<Nx>& predicted, const MeasurementSet<Nz>& Z,
                                       const ObservationModel<Nx, Nz>& obs, const ClutterModel<Nz>& clutter,
                                       const SensorState& s, const GatingConfig& cfg, bool first_step) {
    const auto targets = extract_targets(predicted);
    return l2_log_likelihood(gate_and_cluster(targets, Z, obs, s, cfg, first_step), Z, obs, clutter);
}

} // namespace scmo
